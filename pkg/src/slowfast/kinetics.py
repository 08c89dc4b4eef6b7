"""Reaction kinetics of the Rosenzweig-MacArthur model with a multiplicative
weak Allee effect, written in the fast time of the slow-fast system::

    du/dt = gamma u (1 - u)(u + beta) - u v / (1 + alpha u)
    dv/dt = epsilon v (u / (1 + alpha u) - delta)

Everything here is a pure function of a frozen :class:`ModelParams`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import AnalysisDegenerateError, InternalConsistencyError, InvalidInputError

__all__ = [
    "ModelParams",
    "EquilibriumReport",
    "CriticalManifoldGeometry",
    "Thresholds",
    "reaction_rates",
    "jacobian",
    "critical_manifold_q0",
    "q0_derivatives",
    "equilibria",
    "coexistence_state",
    "classify_eigenvalues",
    "hopf_threshold_formula",
    "hopf_threshold_bracketed",
    "stability_thresholds",
    "fold_point",
    "layer_flow_direction",
]

# |Re lambda| below this counts as zero.
NON_HYPERBOLIC_TOL = 1e-9
# allowed gap between the closed-form Hopf threshold and the bracketed trace root
HOPF_CROSSCHECK_TOL = 1e-6


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model parameters.

    ``d`` is the predator/prey diffusivity ratio and only matters for the
    spatial model.
    """

    alpha: float
    beta: float
    gamma: float
    delta: float
    epsilon: float = 1.0
    d: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta", "epsilon", "d"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidInputError(f"{name} must be a finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.alpha <= 0:
            raise InvalidInputError(f"alpha must be > 0, got {self.alpha}")
        if self.gamma <= 0:
            raise InvalidInputError(f"gamma must be > 0, got {self.gamma}")
        if self.delta <= 0:
            raise InvalidInputError(f"delta must be > 0, got {self.delta}")
        if not 0 < self.epsilon <= 1:
            raise InvalidInputError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.d < 0:
            raise InvalidInputError(f"d must be >= 0, got {self.d}")

    @property
    def allee_regime(self) -> str:
        """'weak' for 0 < beta < 1, 'strong' for beta < 0, 'absent' for beta >= 1."""
        if 0 < self.beta < 1:
            return "weak"
        if self.beta < 0:
            return "strong"
        if self.beta == 0:
            return "critical"
        return "absent"

    @property
    def weak_allee(self) -> bool:
        return self.allee_regime == "weak"

    @property
    def coexistence_feasible(self) -> bool:
        return self.delta * (self.alpha + 1) < 1

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class EquilibriumReport:
    u: float
    v: float
    kind: str  # "E0", "E1" or "E*"
    stability: str
    eigenvalues: tuple[complex, complex]


@dataclass(frozen=True)
class CriticalManifoldGeometry:
    fold_u: float
    fold_v: float
    transcritical_v: float
    attracting_range: tuple[float, float]  # (u_f, 1]
    repelling_range: tuple[float, float]  # [0, u_f)


@dataclass(frozen=True)
class Thresholds:
    delta_T: float
    delta_H: float


def _check_state(u, v):
    for name, x in (("u", u), ("v", v)):
        if not np.all(np.isfinite(x)):
            raise InvalidInputError(f"{name} must be finite")


def reaction_rates(p: ModelParams, u, v):
    """Right-hand side ``(du/dt, dv/dt)`` of the slow-fast ODE.

    Works elementwise on arrays. The coordinate axes are invariant: ``du/dt``
    is exactly zero for ``u == 0`` and ``dv/dt`` for ``v == 0``.
    """
    _check_state(u, v)
    holling = u / (1 + p.alpha * u)
    du = p.gamma * u * (1 - u) * (u + p.beta) - holling * v
    dv = p.epsilon * v * (holling - p.delta)
    return du, dv


def jacobian(p: ModelParams, u: float, v: float) -> np.ndarray:
    """Closed-form Jacobian of the fast-time system (including epsilon)."""
    a, b, g = p.alpha, p.beta, p.gamma
    s = 1 + a * u
    f_u = g * (-3 * u * u + 2 * (1 - b) * u + b) - v / (s * s)
    f_v = -u / s
    g_u = p.epsilon * v / (s * s)
    g_v = p.epsilon * (u / s - p.delta)
    return np.array([[f_u, f_v], [g_u, g_v]])


def f_uu(p: ModelParams, u: float, v: float) -> float:
    """Second u-derivative of the prey equation."""
    a, b, g = p.alpha, p.beta, p.gamma
    s = 1 + a * u
    return g * (-6 * u + 2 * (1 - b)) + 2 * a * v / s**3


def critical_manifold_q0(p: ModelParams, u):
    """Nontrivial prey nullcline ``v = gamma (1 - u)(u + beta)(1 + alpha u)``."""
    return p.gamma * (1 - u) * (u + p.beta) * (1 + p.alpha * u)


def q0_derivatives(p: ModelParams, u):
    """First three u-derivatives of :func:`critical_manifold_q0`.

    q0 expands to ``gamma * (c3 u^3 + c2 u^2 + c1 u + c0)``.
    """
    a, b, g = p.alpha, p.beta, p.gamma
    c3 = -a
    c2 = a * (1 - b) - 1
    c1 = a * b + 1 - b
    d1 = g * (3 * c3 * u * u + 2 * c2 * u + c1)
    d2 = g * (6 * c3 * u + 2 * c2)
    d3 = g * 6 * c3 + 0 * u
    return d1, d2, d3


def coexistence_state(p: ModelParams, delta: float | None = None) -> tuple[float, float]:
    """``(u*, v*)``; only meaningful when delta (1 + alpha) < 1."""
    delta = p.delta if delta is None else delta
    u_star = delta / (1 - p.alpha * delta)
    v_star = p.gamma * (1 - u_star) * (u_star + p.beta) * (1 + p.alpha * u_star)
    return u_star, v_star


def classify_eigenvalues(eigs) -> str:
    """Label a planar equilibrium from its two eigenvalues."""
    re = [complex(z).real for z in eigs]
    im = [complex(z).imag for z in eigs]
    if any(abs(r) < NON_HYPERBOLIC_TOL for r in re):
        return "non-hyperbolic"
    if re[0] * re[1] < 0:
        return "saddle"
    oscillatory = any(abs(x) > 0 for x in im)
    side = "stable" if re[0] < 0 else "unstable"
    return f"{side} {'focus' if oscillatory else 'node'}"


def _report(p: ModelParams, u: float, v: float, kind: str) -> EquilibriumReport:
    eigs = np.linalg.eigvals(jacobian(p, u, v))
    eigs = tuple(sorted((complex(z) for z in eigs), key=lambda z: (z.real, z.imag)))
    return EquilibriumReport(u, v, kind, classify_eigenvalues(eigs), eigs)


def equilibria(p: ModelParams) -> list[EquilibriumReport]:
    """E0 and E1 always; E* only when delta (alpha + 1) < 1."""
    out = [_report(p, 0.0, 0.0, "E0"), _report(p, 1.0, 0.0, "E1")]
    if p.coexistence_feasible:
        u_star, v_star = coexistence_state(p)
        out.append(_report(p, u_star, v_star, "E*"))
    return out


def _radical(alpha: float, beta: float) -> float:
    a, b = alpha, beta
    disc = 1 + a + a * a - a * b + a * a * b + a * a * b * b
    if disc < 0:
        raise AnalysisDegenerateError(f"negative fold discriminant {disc:.6g}")
    return math.sqrt(disc)


def hopf_threshold_formula(alpha: float, beta: float) -> float:
    a, b = alpha, beta
    den = a * (-1 - a + a * b + a * a * b)
    if abs(den) < 1e-14:
        raise AnalysisDegenerateError("Hopf threshold denominator vanishes")
    return (1 + a * a * b - _radical(a, b)) / den


def _trace_at_coexistence(alpha: float, beta: float, gamma: float, delta: float) -> float:
    p = ModelParams(alpha, beta, gamma, delta)
    u_star, v_star = coexistence_state(p)
    return float(np.trace(jacobian(p, u_star, v_star)))


def hopf_threshold_bracketed(alpha: float, beta: float, gamma: float = 1.0) -> float:
    """Root of trace(J*) in delta on (0, 1/(1 + alpha)), by Brent's method."""
    lo, hi = 1e-12, 1 / (1 + alpha) * (1 - 1e-12)
    f_lo = _trace_at_coexistence(alpha, beta, gamma, lo)
    f_hi = _trace_at_coexistence(alpha, beta, gamma, hi)
    if f_lo * f_hi > 0:
        raise AnalysisDegenerateError("trace(J*) does not change sign on the feasible range")
    return brentq(lambda d: _trace_at_coexistence(alpha, beta, gamma, d), lo, hi, xtol=1e-15, rtol=1e-15)


def stability_thresholds(alpha: float, beta: float, gamma: float = 1.0) -> Thresholds:
    """Transcritical (E1) and Hopf (E*) thresholds in delta.

    The closed-form Hopf value is cross-checked against a bracketed root of
    trace(J*); gamma only enters that check.
    """
    delta_T = 1 / (1 + alpha)
    delta_H = hopf_threshold_formula(alpha, beta)
    bracketed = hopf_threshold_bracketed(alpha, beta, gamma)
    if abs(delta_H - bracketed) > HOPF_CROSSCHECK_TOL:
        raise InternalConsistencyError(
            f"Hopf threshold formula gives {delta_H!r}, trace root gives {bracketed!r}"
        )
    return Thresholds(delta_T, delta_H)


def fold_point(p: ModelParams) -> CriticalManifoldGeometry:
    """Maximum of q0 on (0, 1): the fold separating attracting and repelling branches."""
    a, b = p.alpha, p.beta
    u_f = ((a - a * b - 1) + _radical(a, b)) / (3 * a)
    v_f = critical_manifold_q0(p, u_f)
    # fold conditions for f = u/(1 + alpha u) * (q0(u) - v)
    dq, ddq, _ = q0_derivatives(p, u_f)
    f_u = u_f / (1 + a * u_f) * dq
    f_v = -u_f / (1 + a * u_f)
    f_uu_val = f_uu(p, u_f, v_f)
    scale = max(1.0, abs(v_f))
    if abs(f_u) > 1e-9 * scale or f_v == 0 or abs(f_uu_val) < 1e-12 or ddq >= 0:
        raise AnalysisDegenerateError(
            f"fold conditions fail at u_f={u_f!r}: f_u={f_u:.3g}, f_v={f_v:.3g}, f_uu={f_uu_val:.3g}"
        )
    return CriticalManifoldGeometry(
        fold_u=u_f,
        fold_v=v_f,
        transcritical_v=p.gamma * p.beta,
        attracting_range=(u_f, 1.0),
        repelling_range=(0.0, u_f),
    )


def layer_flow_direction(p: ModelParams, u: float, v_const: float) -> int:
    """Sign of du/dt on the fast fibre ``v = v_const`` (u > 0)."""
    if u <= 0:
        raise InvalidInputError("layer flow direction needs u > 0")
    # f = u/(1 + alpha u) * (q0(u) - v) and the prefactor is positive
    diff = critical_manifold_q0(p, u) - v_const
    return int(np.sign(diff))
