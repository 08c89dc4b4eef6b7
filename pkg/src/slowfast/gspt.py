"""Geometric singular perturbation analytics for the slow-fast model.

Covers the asymptotic expansion of the attracting/repelling slow manifold,
the canard-point normal form and its blow-up coefficients, the singular Hopf
and maximal canard curves in the (delta, epsilon) plane, the entry-exit map
along the predator axis, and the four-way regime classification.

Normal form
-----------
After the time rescaling ``t -> (1 + alpha u) t`` the system reads::

    u' = u (q0(u) - v)                =: F(u, v)
    v' = eps v (u (1 - alpha delta) - delta)

Shifting to the canard point (u*, v*, delta*) with U = u - u*, V = v - v*,
lambda = delta - delta* and expanding gives::

    U' = -V (u* + U) + U^2 (b2 + a3 U) + O(U^4)
    V' = eps ((v* + V)(1 - alpha delta*) U - lambda h5(U, V))

Chart K2 of the blow-up uses U = sqrt(eps) U2, V = eps V2,
lambda = sqrt(eps) lambda2, time sqrt(eps) t. The U2^2 coefficient of the
scaled V2 equation (``a4``) comes from the U-dependence of
``(v* + V)(1 - alpha delta*)``, which has none, so ``a4 = 0``. The V2
coefficient ``a5`` is ``u* - (1 + alpha u*) delta*``, which vanishes at the
canard point; it is evaluated rather than hard-coded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AnalysisDegenerateError,
    InternalConsistencyError,
    NoExitError,
    NotApplicableError,
    SingularExpansionError,
)
from .kinetics import (
    ModelParams,
    coexistence_state,
    critical_manifold_q0,
    f_uu,
    fold_point,
    hopf_threshold_formula,
    q0_derivatives,
)

__all__ = [
    "SlowManifoldExpansion",
    "NormalFormCoefficients",
    "MelnikovCoefficients",
    "SlowFastCurves",
    "EntryExitSolution",
    "RegimeLabel",
    "slow_manifold_expand",
    "normal_form_coefficients",
    "melnikov_coefficients",
    "gaussian_moment_integral",
    "slow_fast_curves",
    "singular_hopf_delta",
    "maximal_canard_delta",
    "entry_exit_residual",
    "entry_exit_point",
    "relaxation_feasible",
    "classify_regime",
]

DEFAULT_GUARD = 1e-3


# ---------------------------------------------------------------------------
# slow manifold expansion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlowManifoldExpansion:
    """``q(u, eps) = q0(u) + eps q1(u) + eps^2 q2(u)`` truncated at ``order``.

    q1 and q2 have poles where u = 0 or q0'(u) = 0; evaluating within
    ``guard`` of one raises :class:`SingularExpansionError`.
    """

    params: ModelParams
    order: int = 2
    guard: float = DEFAULT_GUARD
    singular_set: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {self.order}")
        p = self.params
        # real roots of q0'(u) = gamma (3 c3 u^2 + 2 c2 u + c1)
        a, b = p.alpha, p.beta
        roots = np.roots([-3 * a, 2 * (a * (1 - b) - 1), a * b + 1 - b])
        real = sorted(float(r.real) for r in roots if abs(r.imag) < 1e-12)
        object.__setattr__(self, "singular_set", (0.0, *real))

    def _check(self, u):
        u_arr = np.asarray(u)
        for s in self.singular_set:
            if np.any(np.abs(u_arr.real - s) < self.guard):
                raise SingularExpansionError(
                    f"u within {self.guard:g} of the expansion pole at u={s:.6g}"
                )

    def _slow_factor(self, u):
        p = self.params
        return u * (1 - p.alpha * p.delta) - p.delta

    def q0(self, u):
        return critical_manifold_q0(self.params, u)

    def q1(self, u):
        self._check(u)
        return self._q1(u)

    def q2(self, u):
        self._check(u)
        return self._q2(u)

    def q1_prime(self, u):
        self._check(u)
        return self._q1_prime(u)

    def _q1(self, u):
        dq0 = q0_derivatives(self.params, u)[0]
        return self.q0(u) * self._slow_factor(u) / (-u * dq0)

    def _q1_prime(self, u):
        p = self.params
        dq0, ddq0, _ = q0_derivatives(p, u)
        num = self.q0(u) * self._slow_factor(u)
        den = -u * dq0
        dnum = dq0 * self._slow_factor(u) + self.q0(u) * (1 - p.alpha * p.delta)
        dden = -(dq0 + u * ddq0)
        return (dnum * den - num * dden) / (den * den)

    def _q2(self, u):
        dq0 = q0_derivatives(self.params, u)[0]
        q1 = self._q1(u)
        return (q1 * self._slow_factor(u) + u * q1 * self._q1_prime(u)) / (-u * dq0)

    def __call__(self, u, eps: float):
        if self.order == 0:
            return self.q0(u)
        self._check(u)
        out = self.q0(u) + eps * self._q1(u)
        if self.order == 2:
            out = out + eps * eps * self._q2(u)
        return out

    def derivative(self, u, eps: float):
        """du-derivative of the truncated expansion.

        q2' is taken by complex-step differentiation of the closed form.
        """
        dq0 = q0_derivatives(self.params, u)[0]
        if self.order == 0:
            return dq0
        self._check(u)
        out = dq0 + eps * self._q1_prime(u)
        if self.order == 2:
            h = 1e-30
            out = out + eps * eps * (self._q2(np.asarray(u, dtype=complex) + 1j * h)).imag / h
        return out

    def invariance_residual(self, u, eps: float):
        """Defect of the invariance condition for the truncated manifold.

        ``eps q L(u) - u q'(u) (q0(u) - q)`` with ``L(u) = u(1 - alpha delta) - delta``;
        zero for the exact slow manifold, O(eps^(order + 1)) for the expansion.
        """
        q = self(u, eps)
        return eps * q * self._slow_factor(u) - u * self.derivative(u, eps) * (self.q0(u) - q)


def slow_manifold_expand(p: ModelParams, order: int = 2, guard: float = DEFAULT_GUARD) -> SlowManifoldExpansion:
    return SlowManifoldExpansion(p, order, guard)


# ---------------------------------------------------------------------------
# normal form, Melnikov integrals and the two curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalFormCoefficients:
    delta_star: float
    u_star: float
    v_star: float
    b1: float
    b2: float
    b3: float
    b4: float
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float


@dataclass(frozen=True)
class MelnikovCoefficients:
    A1: float
    A2: float
    A3: float
    A4: float
    A5: float
    d_r: float
    d_lambda: float

    @property
    def bracket(self) -> float:
        """``3 A1/(4 A4^2) + A2/(2 A4) + A3`` (the polynomial's Gaussian mean)."""
        return 3 * self.A1 / (4 * self.A4**2) + self.A2 / (2 * self.A4) + self.A3


@dataclass(frozen=True)
class SlowFastCurves:
    normal_form: NormalFormCoefficients
    melnikov: MelnikovCoefficients

    @property
    def delta_star(self) -> float:
        return self.normal_form.delta_star

    @property
    def hopf_slope(self) -> float:
        nf = self.normal_form
        return nf.b3 * (nf.a1 + nf.a5) / (2 * nf.b2 * nf.b4)

    @property
    def canard_slope(self) -> float:
        return self.melnikov.bracket / self.melnikov.A5

    def delta_H(self, epsilon: float) -> float:
        if epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        return self.delta_star - self.hopf_slope * epsilon

    def delta_c(self, epsilon: float) -> float:
        if epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        return self.delta_star - self.canard_slope * epsilon


def normal_form_coefficients(p: ModelParams) -> NormalFormCoefficients:
    """Blow-up coefficients at the canard point delta* (the Hopf threshold)."""
    a, b, g = p.alpha, p.beta, p.gamma
    delta_star = hopf_threshold_formula(a, b)
    if not 0 < delta_star or delta_star * (a + 1) >= 1:
        raise AnalysisDegenerateError(
            f"canard point delta*={delta_star:.6g} is outside the coexistence range"
        )
    u, v = coexistence_state(p, delta_star)
    b1 = u
    b2 = -g * (-1 + 6 * u * u * a + 3 * u * (1 + a * (b - 1)) + b - a * b)
    b3 = v * (1 - a * delta_star)
    b4 = v * (1 + a * u)
    a1 = 0.0
    a2 = 1.0
    a3 = -(g + a * g * (4 * u + b - 1))
    a4 = 0.0
    a5 = u - (1 + u * a) * delta_star

    # b2 must be half the second derivative of F = (1 + alpha u) f at the fold
    half_F_uu = 0.5 * (1 + a * u) * f_uu(p, u, v)
    if abs(b2 - half_F_uu) > 1e-9 * max(1.0, abs(b2)):
        raise InternalConsistencyError(f"b2={b2!r} but F_uu/2={half_F_uu!r}")
    return NormalFormCoefficients(delta_star, u, v, b1, b2, b3, b4, a1, a2, a3, a4, a5)


def gaussian_moment_integral(A1: float, A2: float, A3: float, A4: float) -> float:
    """``int exp(-A4 t^2) (A1 t^4 + A2 t^2 + A3) dt`` over the real line."""
    if A4 <= 0:
        raise AnalysisDegenerateError(f"A4 must be positive, got {A4}")
    mean = 3 * A1 / (4 * A4 * A4) + A2 / (2 * A4) + A3
    return mean * math.sqrt(math.pi / A4)


def melnikov_coefficients(nf: NormalFormCoefficients) -> MelnikovCoefficients:
    b1, b2, b3, b4 = nf.b1, nf.b2, nf.b3, nf.b4
    a1, a2, a3, a4, a5 = nf.a1, nf.a2, nf.a3, nf.a4, nf.a5
    A1 = a3 * b3 - a2 * b2 * b3 / b1
    A2 = a1 * b3 + a2 * b3 * b3 / (2 * b2) - a4 * b1 * b3 / (2 * b2) - a5 * b3 / 2
    A3 = a5 * b1 * b3 * b3 / (4 * b2 * b2)
    A4 = 2 * b2 * b2 / (b1 * b3)
    A5 = b1 * b3 * b4 / (2 * b2)
    if A4 <= 0:
        raise AnalysisDegenerateError(f"A4={A4:.6g} must be positive")
    # along the Riccati parabola exp(-2 b2 V / b3) = e * exp(-A4 t^2)
    d_r = math.e * gaussian_moment_integral(A1, A2, A3, A4)
    d_lambda = math.e * A5 * math.sqrt(math.pi / A4)
    return MelnikovCoefficients(A1, A2, A3, A4, A5, d_r, d_lambda)


def slow_fast_curves(p: ModelParams) -> SlowFastCurves:
    nf = normal_form_coefficients(p)
    return SlowFastCurves(nf, melnikov_coefficients(nf))


def singular_hopf_delta(p: ModelParams, epsilon: float | None = None) -> float:
    """delta_H(sqrt(eps)) truncated after the O(eps) term."""
    eps = p.epsilon if epsilon is None else epsilon
    return slow_fast_curves(p).delta_H(eps)


def maximal_canard_delta(p: ModelParams, epsilon: float | None = None) -> float:
    """delta_c(sqrt(eps)) truncated after the O(eps) term."""
    eps = p.epsilon if epsilon is None else epsilon
    return slow_fast_curves(p).delta_c(eps)


# ---------------------------------------------------------------------------
# entry-exit along the predator axis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntryExitSolution:
    v1: float
    v0: float
    tc: float
    residual: float


def entry_exit_residual(v0: float, v1: float, tc: float) -> float:
    return (v1 - v0) - tc * math.log(v1 / v0)


def entry_exit_point(p: ModelParams, v1: float, *, max_iter: int = 200, tol: float = 1e-12) -> EntryExitSolution:
    """Exit level v0 in (0, gamma beta) for a trajectory entering the axis at v1.

    Solves ``(v1 - v0) - gamma beta ln(v1 / v0) = 0`` by bisection. The
    residual is increasing in v0 on (0, gamma beta), so the root is unique.
    delta cancels from the integrand and plays no role.
    """
    tc = p.gamma * p.beta
    if not v1 > tc:
        raise NoExitError(f"v1={v1:.6g} must exceed the transcritical level {tc:.6g}")
    hi = tc
    # h(tc) > 0 strictly; shrink lo until h(lo) < 0
    lo = tc / 2
    while entry_exit_residual(lo, v1, tc) >= 0:
        lo /= 2
        if lo < 1e-300:
            raise AnalysisDegenerateError("could not bracket the exit point")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if entry_exit_residual(mid, v1, tc) < 0:
            lo = mid
        else:
            hi = mid
    r_lo, r_hi = entry_exit_residual(lo, v1, tc), entry_exit_residual(hi, v1, tc)
    v0, res = (lo, r_lo) if abs(r_lo) <= abs(r_hi) else (hi, r_hi)
    if abs(res) > tol and hi - lo > 4 * math.ulp(hi):
        raise AnalysisDegenerateError(f"bisection stalled with residual {res:.3g}")
    return EntryExitSolution(v1=v1, v0=v0, tc=tc, residual=res)


def relaxation_feasible(p: ModelParams) -> bool:
    """True when E* sits strictly on the repelling branch (u* < u_f)."""
    if not p.coexistence_feasible:
        raise NotApplicableError("no coexistence equilibrium for these parameters")
    u_star, _ = coexistence_state(p)
    u_f = fold_point(p).fold_u
    # equality (the canard point) within rounding counts as not feasible
    return u_f - u_star > 1e-12 * max(1.0, u_f)


# ---------------------------------------------------------------------------
# regime classification
# ---------------------------------------------------------------------------

REGIME_NAMES = {
    "I": "stable coexistence",
    "II": "canard without head",
    "III": "canard with head",
    "IV": "relaxation oscillation",
    "III∪IV": "canard with head or relaxation oscillation",
}


@dataclass(frozen=True)
class RegimeLabel:
    label: str
    delta: float
    epsilon: float
    delta_H: float
    delta_c: float
    delta_ro: float | None

    @property
    def description(self) -> str:
        return REGIME_NAMES[self.label]


def classify_regime(
    p: ModelParams,
    epsilon: float | None = None,
    *,
    delta_ro: float | None = None,
    simulate: bool = True,
    **locator_kwargs,
) -> RegimeLabel:
    """Place (delta, epsilon) in one of the four domains I-IV.

    The relaxation boundary delta_ro has no closed form. It is taken from
    ``delta_ro`` if given, otherwise located by simulation (the lower end of
    the canard-explosion window). With ``simulate=False`` and no
    ``delta_ro``, everything below delta_c is reported as ``"III∪IV"``; the
    same label is used when the simulation finds no sharp explosion (large
    epsilon), since cycle growth then does not separate III from IV.
    """
    eps = p.epsilon if epsilon is None else epsilon
    if not 0 < eps <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    curves = slow_fast_curves(p)
    d_H, d_c = curves.delta_H(eps), curves.delta_c(eps)
    delta = p.delta

    def label(name, ro=None):
        return RegimeLabel(name, delta, eps, d_H, d_c, ro)

    if delta > d_H:
        return label("I")
    if delta > d_c:
        return label("II", delta_ro)
    if delta_ro is None and simulate:
        from .errors import ExplosionNotDetectedError
        from .odesim import locate_explosion_window

        try:
            window = locate_explosion_window(p.replace(epsilon=eps), eps, **locator_kwargs)
            delta_ro = window.delta_lo
        except ExplosionNotDetectedError:
            return label("III∪IV")
    if delta_ro is None:
        return label("III∪IV")
    return label("IV" if delta <= delta_ro else "III", delta_ro)
