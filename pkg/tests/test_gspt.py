import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from slowfast.errors import AnalysisDegenerateError, NoExitError, NotApplicableError, SingularExpansionError
from slowfast.gspt import (
    classify_regime,
    entry_exit_point,
    entry_exit_residual,
    gaussian_moment_integral,
    maximal_canard_delta,
    melnikov_coefficients,
    normal_form_coefficients,
    relaxation_feasible,
    singular_hopf_delta,
    slow_fast_curves,
    slow_manifold_expand,
)
from slowfast.kinetics import ModelParams, coexistence_state, fold_point, jacobian, stability_thresholds

REF = ModelParams(0.5, 0.22, 3.0, 0.3, 0.01)


def invariance_ratios(p, eps_list, us):
    sm = slow_manifold_expand(p, order=2)
    res = [np.abs(sm.invariance_residual(us, e)) for e in eps_list]
    return [r0 / r1 for r0, r1 in zip(res, res[1:])]


def test_expansion_residual_is_third_order():
    p = ModelParams(0.5, 0.2, 3.0, 0.3)
    us = np.linspace(0.55, 0.95, 10)
    for ratio in invariance_ratios(p, [1e-2, 5e-3, 2.5e-3, 1.25e-3], us):
        assert np.all((ratio >= 6) & (ratio <= 10))


def test_expansion_residual_matches_extended_precision():
    # oracle: invariance defect of the same truncated series evaluated with mpmath
    p = ModelParams(0.5, 0.2, 3.0, 0.3)
    mp.mp.dps = 50
    a, b, g, d = (mp.mpf(x) for x in ("0.5", "0.2", "3", "0.3"))

    def q0(u):
        return g * (1 - u) * (u + b) * (1 + a * u)

    def L(u):
        return u * (1 - a * d) - d

    def q1(u):
        return q0(u) * L(u) / (-u * mp.diff(q0, u))

    def q2(u):
        return (q1(u) * L(u) + u * q1(u) * mp.diff(q1, u)) / (-u * mp.diff(q0, u))

    sm = slow_manifold_expand(p)
    eps = mp.mpf("0.01")
    for uf in (0.6, 0.8):
        u = mp.mpf(uf)
        q = lambda x: q0(x) + eps * q1(x) + eps**2 * q2(x)  # noqa: E731
        ref = eps * q(u) * L(u) - u * mp.diff(q, u) * (q0(u) - q(u))
        got = sm.invariance_residual(uf, 0.01)
        assert float(abs(got - ref)) < 1e-9 * float(abs(ref)) + 1e-15


def test_first_order_terms():
    p = ModelParams(0.5, 0.2, 3.0, 0.3)
    sm = slow_manifold_expand(p)
    u_star, _ = coexistence_state(p)
    assert sm.q1(u_star) == pytest.approx(0, abs=1e-14)
    assert sm.q2(u_star) == pytest.approx(0, abs=1e-14)
    assert sm(0.5, 0.0) == sm.q0(0.5)


def test_guard_radius():
    p = ModelParams(0.5, 0.2, 3.0, 0.3)
    sm = slow_manifold_expand(p)
    u_f = fold_point(p).fold_u
    with pytest.raises(SingularExpansionError):
        sm.q1(u_f + 5e-4)
    with pytest.raises(SingularExpansionError):
        sm(np.array([0.5, 1e-4]), 0.01)
    sm.q1(u_f + 2e-3)


def test_normal_form_values():
    nf = normal_form_coefficients(REF)
    assert nf.b1 == pytest.approx(0.46438, abs=1e-4)
    assert nf.b2 == pytest.approx(-1.8203, abs=1e-3)
    assert nf.b3 > 0 and nf.b4 > 0
    assert nf.a4 == 0
    assert abs(nf.a5) < 1e-14


def test_b2_extended_precision():
    mp.mp.dps = 40
    a, b, g = mp.mpf("0.5"), mp.mpf("0.22"), mp.mpf(3)
    d = mp.mpf(stability_thresholds(0.5, 0.22, 3.0).delta_H)
    u = d / (1 - a * d)
    F = lambda x: g * x * (1 - x) * (x + b) * (1 + a * x)  # noqa: E731
    # U^2 coefficient of u (q0(u) - v) at fixed v = v*
    v = g * (1 - u) * (u + b) * (1 + a * u)
    coeff = mp.diff(lambda x: F(x) - x * v, u, 2) / 2
    assert normal_form_coefficients(REF).b2 == pytest.approx(float(coeff), rel=1e-9)


def test_canard_point_is_fold():
    nf = normal_form_coefficients(REF)
    assert nf.u_star == pytest.approx(fold_point(REF).fold_u, abs=1e-9)


def test_degenerate_normal_form():
    with pytest.raises(AnalysisDegenerateError):
        normal_form_coefficients(ModelParams(0.5, 2.5, 3.0, 0.3))


def _quadrature(A1, A2, A3, A4):
    cut = 20 / math.sqrt(A4)
    f = lambda t: math.exp(-A4 * t * t) * (A1 * t**4 + A2 * t**2 + A3)  # noqa: E731
    val, _ = quad(f, -cut, cut, epsabs=0, epsrel=1e-13, limit=200)
    return val


def test_gaussian_moments_match_quadrature():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        A1, A2, A3 = rng.uniform(-5, 5, 3)
        A4 = rng.uniform(0.05, 20)
        closed = gaussian_moment_integral(A1, A2, A3, A4)
        ref = _quadrature(A1, A2, A3, A4)
        assert abs(closed - ref) <= 1e-8 * abs(ref)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(0.5, 5), st.floats(0.05, 20))
def test_gaussian_moments_property(A1, A2, A3, A4):
    closed = gaussian_moment_integral(A1, A2, A3, A4)
    ref = _quadrature(A1, A2, A3, A4)
    assert closed == pytest.approx(ref, rel=1e-8, abs=1e-10)


def test_gaussian_rejects_nonpositive_A4():
    with pytest.raises(AnalysisDegenerateError):
        gaussian_moment_integral(1, 1, 1, 0.0)


def test_melnikov_constant_term_only():
    nf = normal_form_coefficients(REF)
    m = melnikov_coefficients(nf)
    assert m.A4 > 0
    assert m.d_r / m.d_lambda == pytest.approx(m.bracket / m.A5)
    # synthetic: A1 = A2 = 0 leaves A3 / A5
    A3, A4, A5 = 0.7, 2.0, -1.3
    d_r = math.e * gaussian_moment_integral(0, 0, A3, A4)
    d_l = math.e * A5 * math.sqrt(math.pi / A4)
    assert d_r / d_l == pytest.approx(A3 / A5, rel=1e-14)


def test_curves_anchor():
    for beta in (0.1, 0.22, 0.5):
        p = ModelParams(0.5, beta, 3.0, 0.3)
        c = slow_fast_curves(p)
        d4 = stability_thresholds(0.5, beta, 3.0).delta_H
        assert abs(c.delta_H(0) - d4) < 1e-12
        assert abs(c.delta_c(0) - d4) < 1e-12
        assert singular_hopf_delta(p, 0.0) == d4


def test_delta_H_near_numerical_hopf():
    # trace(J*) root does not depend on eps since trace = f_u at E* (g_v = 0 there)
    p = REF
    d_num = stability_thresholds(0.5, 0.22, 3.0).delta_H
    assert abs(singular_hopf_delta(p, 0.01) - d_num) < 0.01
    u, v = coexistence_state(p, d_num)
    assert abs(np.trace(jacobian(p.replace(delta=d_num), u, v))) < 1e-9


def test_maximal_canard_value():
    d_c = maximal_canard_delta(REF, 0.01)
    assert 0.36 <= d_c <= 0.3762
    assert d_c < singular_hopf_delta(REF, 0.01)


def test_entry_exit_worked_example():
    p = ModelParams(0.5, 0.2, 3.0, 0.3)
    geo = fold_point(p)
    assert geo.fold_u == pytest.approx(0.472, abs=1e-3)
    assert geo.fold_v == pytest.approx(1.316, abs=1e-3)
    sol = entry_exit_point(p, geo.fold_v)
    assert sol.v0 == pytest.approx(0.207509, abs=5e-4)
    assert entry_exit_point(p, 1.316).v0 == pytest.approx(0.207509, abs=5e-4)


def test_entry_exit_scan_oracle():
    # gamma beta = 0.6, v1 = 1.2: 1e-6 step scan for the sign change, then bisection
    grid = np.arange(1e-6, 0.6, 1e-6)
    h = (1.2 - grid) - 0.6 * np.log(1.2 / grid)
    i = int(np.nonzero(np.diff(np.sign(h)))[0][0])
    lo, hi = grid[i], grid[i + 1]
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.sign(entry_exit_residual(mid, 1.2, 0.6)) == np.sign(entry_exit_residual(lo, 1.2, 0.6)):
            lo = mid
        else:
            hi = mid
    sol = entry_exit_point(ModelParams(0.5, 0.2, 3.0, 0.3), 1.2)
    assert sol.v0 == pytest.approx(lo, abs=1e-12)


def test_entry_exit_delta_independent():
    v_a = entry_exit_point(ModelParams(0.5, 0.2, 3.0, 0.1), 1.316).v0
    v_b = entry_exit_point(ModelParams(0.5, 0.2, 3.0, 0.5), 1.316).v0
    assert abs(v_a - v_b) <= 1e-12


def test_entry_exit_degenerate_limit():
    p = ModelParams(0.5, 0.2, 3.0, 0.3)
    tc = 0.6
    sol = entry_exit_point(p, tc * (1 + 1e-6))
    assert sol.v0 == pytest.approx(tc, rel=1e-5)
    assert sol.v0 < tc
    with pytest.raises(NoExitError):
        entry_exit_point(p, tc)
    with pytest.raises(NoExitError):
        entry_exit_point(p, 0.3)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 5), st.floats(0.01, 0.99), st.floats(1.0001, 20))
def test_entry_exit_ordering(g, b, ratio):
    p = ModelParams(0.5, b, g, 0.3)
    tc = g * b
    sol = entry_exit_point(p, tc * ratio)
    assert 0 < sol.v0 < tc < sol.v1
    assert abs(sol.residual) <= 1e-12 * max(1.0, tc * ratio)


def test_relaxation_feasible():
    assert relaxation_feasible(ModelParams(0.5, 0.2, 3.0, 0.3))
    assert not relaxation_feasible(ModelParams(0.5, 0.2, 3.0, 0.6))
    d_H = stability_thresholds(0.5, 0.2, 3.0).delta_H
    assert not relaxation_feasible(ModelParams(0.5, 0.2, 3.0, d_H))
    with pytest.raises(NotApplicableError):
        relaxation_feasible(ModelParams(0.5, 0.2, 3.0, 0.7))


def test_classify_regime_analytic():
    assert classify_regime(REF.replace(delta=0.40)).label == "I"
    assert classify_regime(REF.replace(delta=0.3762)).label == "II"
    assert classify_regime(REF.replace(delta=0.36), simulate=False).label == "III∪IV"
    assert classify_regime(REF.replace(delta=0.36), delta_ro=0.37).label == "IV"
    assert classify_regime(REF.replace(delta=0.3761), delta_ro=0.37).label == "III"


@pytest.mark.slow
def test_classify_regime_relaxation_by_simulation():
    lab = classify_regime(REF.replace(delta=0.36))
    assert lab.label == "IV"
    assert 0.36 < lab.delta_ro < 0.3762
