"""Linear analysis of traveling waves of the reaction-diffusion model.

With ``u(x, t) = phi(xi)``, ``v(x, t) = psi(xi)``, ``xi = x - c t`` and
``p = -phi'``, ``q = -psi'`` the profile equations form a first-order system
in ``(phi, p, psi, q)``::

    phi' = -p
    p'   = f(phi, psi) - c p
    psi' = -q
    q'   = (eps g(phi, psi) - c q) / d

where ``f`` and ``eps g`` are the prey and predator reaction terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvasionInfeasibleError
from .kinetics import ModelParams, coexistence_state, jacobian

__all__ = ["TWAnalysis", "tw_min_speed", "tw_jacobian", "tw_eigen_analysis"]

# imaginary parts below this count as real
REAL_EIG_TOL = 1e-10


@dataclass(frozen=True)
class TWAnalysis:
    c: float
    c_min: float | None
    eig_Q1: tuple[complex, ...]
    eig_Qstar: tuple[complex, ...] | None
    wave_type: str | None  # monotone, non_monotone or periodic
    selected_pair: tuple[complex, complex] | None


def tw_min_speed(p: ModelParams, epsilon: float | None = None) -> float:
    """Minimum speed of a front invading the predator-free state (1, 0).

    ``epsilon`` overrides ``p.epsilon`` and may be 0.
    """
    eps = p.epsilon if epsilon is None else float(epsilon)
    if eps < 0:
        raise InvalidInputError("epsilon must be >= 0")
    a, dl, d = p.alpha, p.delta, p.d
    if dl * (1 + a) >= 1:
        raise InvasionInfeasibleError(
            f"delta (1 + alpha) = {dl * (1 + a):.6g} >= 1: the predator cannot invade"
        )
    c_min = math.sqrt(4 * eps * d * (1 - dl - a * dl) / (1 + a))
    # the same speed written via the predator's linear growth rate at (1, 0)
    c_v = 2 * math.sqrt(eps * d * (1 / (a + 1) - dl))
    if abs(c_min - c_v) > 1e-12 * max(1.0, c_min):
        raise ArithmeticError(f"speed formulas disagree: {c_min!r} vs {c_v!r}")
    return c_min


def tw_jacobian(p: ModelParams, c: float, u: float, v: float) -> np.ndarray:
    if p.d <= 0:
        raise InvalidInputError("the four-dimensional profile system needs d > 0")
    (f_u, f_v), (g_u, g_v) = jacobian(p, u, v)  # rows already carry eps
    d = p.d
    return np.array(
        [
            [0.0, -1.0, 0.0, 0.0],
            [f_u, -c, f_v, 0.0],
            [0.0, 0.0, 0.0, -1.0],
            [g_u / d, 0.0, g_v / d, -c / d],
        ]
    )


def _sorted_eigs(m: np.ndarray) -> tuple[complex, ...]:
    eigs = np.linalg.eigvals(m)
    return tuple(sorted((complex(z) for z in eigs), key=lambda z: (z.real, z.imag)))


def tw_eigen_analysis(p: ModelParams, c: float | None = None) -> TWAnalysis:
    """Eigenvalues at Q1 = (1, 0, 0, 0) and Q* = (u*, 0, v*, 0) and the predicted wave type.

    Wave type from the spectrum at Q*: all eigenvalues real gives a
    monotone profile. Otherwise the profile oscillates about E*; it settles
    (non_monotone) when E* is stable for the kinetics and keeps oscillating
    (periodic wake) when E* is unstable. The complex pair reported is the one
    with negative real part in the first case and positive in the second.
    """
    c_min = None
    try:
        c_min = tw_min_speed(p)
    except InvasionInfeasibleError:
        pass
    if c is None:
        if c_min is None:
            raise InvasionInfeasibleError("no default speed: the predator cannot invade")
        c = c_min
    if c < 0:
        raise InvalidInputError("wave speed must be >= 0")

    eig_q1 = _sorted_eigs(tw_jacobian(p, c, 1.0, 0.0))
    if not p.coexistence_feasible:
        return TWAnalysis(c, c_min, eig_q1, None, None, None)

    u, v = coexistence_state(p)
    eig_qs = _sorted_eigs(tw_jacobian(p, c, u, v))
    complex_eigs = [z for z in eig_qs if abs(z.imag) > REAL_EIG_TOL]
    if not complex_eigs:
        return TWAnalysis(c, c_min, eig_q1, eig_qs, "monotone", None)

    temporally_stable = np.trace(jacobian(p, u, v)) < 0
    if temporally_stable:
        pick = [z for z in complex_eigs if z.real < 0]
        kind = "non_monotone"
    else:
        pick = [z for z in complex_eigs if z.real > 0]
        kind = "periodic"
    if len(pick) < 2:
        # no pair on the required side: report the pair nearest the imaginary axis
        pick = sorted(complex_eigs, key=lambda z: abs(z.real))[:2]
    pair = tuple(sorted(pick[:2], key=lambda z: z.imag))
    return TWAnalysis(c, c_min, eig_q1, eig_qs, kind, pair)
