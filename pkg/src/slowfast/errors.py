"""Exception and warning classes raised across the package."""

from __future__ import annotations


class SlowFastError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SlowFastError, ValueError):
    """Parameters or states outside the model's domain."""


class AnalysisDegenerateError(SlowFastError, ArithmeticError):
    """A closed-form quantity is undefined for the given parameters."""


class InternalConsistencyError(SlowFastError, RuntimeError):
    """Two independent routes to the same quantity disagree."""


class SingularExpansionError(SlowFastError, ValueError):
    """Slow-manifold expansion evaluated too close to one of its poles."""


class NoExitError(SlowFastError, ValueError):
    """Entry point lies at or below the transcritical level; there is no exit."""


class NotApplicableError(SlowFastError, ValueError):
    """The requested analysis needs a coexistence equilibrium that does not exist."""


class InvasionInfeasibleError(SlowFastError, ValueError):
    """Predator cannot invade: delta * (1 + alpha) >= 1."""


class StiffnessError(SlowFastError, RuntimeError):
    """Adaptive step size fell below the underflow threshold."""


class ExplosionNotDetectedError(SlowFastError, RuntimeError):
    """No sharp amplitude jump was found below the Hopf threshold."""


class ConfigurationError(SlowFastError, ValueError):
    """Grid/time-step configuration violates a stability constraint."""


class BlowUpError(SlowFastError, FloatingPointError):
    """A non-finite value appeared during a PDE run."""

    def __init__(self, message: str, step_index: int):
        super().__init__(message)
        self.step_index = step_index


class FrontNotFoundError(SlowFastError, ValueError):
    """No level crossing could be located in a snapshot."""


class ClassificationAmbiguousWarning(UserWarning):
    """A limit cycle sits on the boundary between two cycle types."""

    def __init__(self, message: str, labels: tuple[str, ...]):
        super().__init__(message)
        self.labels = labels


class ClampWarning(UserWarning):
    """Negative densities were clamped to zero."""
