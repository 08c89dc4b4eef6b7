import math
import warnings

import numpy as np
import pytest

from slowfast.errors import (
    ClassificationAmbiguousWarning,
    ExplosionNotDetectedError,
    InvalidInputError,
    StiffnessError,
)
from slowfast.gspt import maximal_canard_delta
from slowfast.integrators import PlanarDP45
from slowfast.kinetics import (
    ModelParams,
    coexistence_state,
    critical_manifold_q0,
    equilibria,
    fold_point,
    stability_thresholds,
)
from slowfast.odesim import (
    CycleSummary,
    bifurcation_sweep,
    classify_cycle,
    detect_limit_cycle,
    integrate,
    locate_explosion_window,
    orbit_gap,
    singular_orbit,
)

REF = ModelParams(0.5, 0.22, 3.0, 0.3, 0.01)
FIG1 = ModelParams(0.5, 0.2, 3.0, 0.3, 1.0)


def test_dp45_exponential_decay():
    solver = PlanarDP45(lambda u, v: (-u, -2 * v), (1.0, 1.0), 0.0, rtol=1e-10, atol=1e-12)
    rec = None
    while solver.t < 5:
        rec = solver.advance(5.0)
    assert rec.t1 == 5.0
    assert rec.y1[0] == pytest.approx(math.exp(-5), rel=1e-8)
    assert rec.y1[1] == pytest.approx(math.exp(-10), rel=1e-7)


def test_dp45_dense_output_order():
    # harmonic oscillator: Hermite interpolant accurate to O(h^4)
    solver = PlanarDP45(lambda u, v: (v, -u), (1.0, 0.0), 0.0, rtol=1e-10, atol=1e-12)
    rec = solver.advance()
    tm = 0.5 * (rec.t0 + rec.t1)
    u, _ = rec.interpolate(tm)
    h = rec.t1 - rec.t0
    assert abs(u - math.cos(tm)) < 10 * h**4


def test_dp45_step_underflow():
    # finite-time blow-up y' = y^2 forces steps below the floor
    solver = PlanarDP45(lambda u, v: (u * u, 0.0), (1.0, 0.0), 0.0, rtol=1e-10, atol=1e-12)
    with pytest.raises(StiffnessError):
        for _ in range(100000):
            solver.advance(2.0)


@pytest.mark.parametrize("coords", ["log", "linear"])
def test_axis_invariance(coords):
    p = FIG1
    traj = integrate(p, (0.0, 0.5), 100.0, 1e-10, coords=coords, t_eval=np.linspace(0, 100, 11))
    assert np.all(traj.states[:, 0] == 0.0)
    np.testing.assert_allclose(traj.states[:, 1], 0.5 * np.exp(-p.epsilon * p.delta * traj.times), rtol=1e-6, atol=1e-6)
    traj = integrate(p, (0.3, 0.0), 100.0, 1e-10, coords=coords)
    assert np.max(np.abs(traj.states[:, 1])) <= 1e-12


def test_equilibrium_fidelity():
    for p in (FIG1, REF, REF.replace(delta=0.5), FIG1.replace(delta=0.7)):
        for eq in equilibria(p):
            y0 = np.array([eq.u, eq.v])
            traj = integrate(p, y0, 100.0, 1e-8)
            drift = np.max(np.linalg.norm(traj.states - y0, axis=1))
            assert drift < 1e-8 * (1 + np.linalg.norm(y0)), (p, eq.kind, drift)


def test_converges_to_stable_coexistence():
    p = REF.replace(delta=0.40)
    u, v = coexistence_state(p)
    traj = integrate(p, (u * 1.05, v * 0.98), 5000.0, 1e-9)
    assert math.dist(traj.final_state, (u, v)) < 1e-4


def test_relaxation_trajectory():
    traj = integrate(REF.replace(delta=0.36), (0.5, 1.0), 3000.0, 1e-9)
    late = traj.states[traj.times > 1000]
    assert late[:, 0].min() < 0.05 and late[:, 0].max() > 0.9


def test_integrate_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        integrate(FIG1, (-0.1, 1.0), 10.0)
    with pytest.raises(InvalidInputError):
        integrate(FIG1, (0.5, math.nan), 10.0)
    with pytest.raises(InvalidInputError):
        integrate(FIG1, (0.5, 1.0), 10.0, tol=0)


def test_linear_coords_agree_with_log():
    a = integrate(FIG1, (0.5, 1.0), 50.0, 1e-10, t_eval=[50.0]).final_state
    b = integrate(FIG1, (0.5, 1.0), 50.0, 1e-10, coords="linear", t_eval=[50.0]).final_state
    assert a == pytest.approx(b, abs=1e-6)


def test_stable_focus_has_no_cycle():
    c = detect_limit_cycle(REF.replace(delta=0.40), (0.5, 1.2))
    assert c.type == "none"
    with pytest.raises(InvalidInputError):
        classify_cycle(c, REF.replace(delta=0.40))


def test_cycle_stable_under_tolerance():
    p = ModelParams(0.5, 0.22, 3.0, 0.3, 1.0)
    a = detect_limit_cycle(p, (0.5, 1.0), tol=1e-8)
    b = detect_limit_cycle(p, (0.5, 1.0), tol=1e-10)
    assert a.type == b.type == "relaxation" or a.amplitude > 0.1
    for k in ("u_min", "u_max", "v_min", "v_max"):
        assert abs(getattr(a, k) - getattr(b, k)) < 1e-3


def test_tolerance_halving_moves_extrema_little():
    p = REF.replace(delta=0.36)
    a = detect_limit_cycle(p, (0.5, 1.0), tol=1e-9)
    b = detect_limit_cycle(p, (0.5, 1.0), tol=5e-10)
    for k in ("u_min", "u_max", "v_min", "v_max"):
        assert abs(getattr(a, k) - getattr(b, k)) < 10 * 1e-9 * max(1, abs(getattr(a, k)))


@pytest.mark.parametrize(
    "delta,expected",
    [(0.3763, "hopf_small"), (0.3762, "canard_headless"), (0.376165, "canard_with_head"), (0.36, "relaxation")],
)
def test_cycle_types(delta, expected):
    p = REF.replace(delta=delta)
    c = detect_limit_cycle(p, (coexistence_state(p)[0] * 1.05, coexistence_state(p)[1]))
    assert c.type == expected


def test_ambiguity_warning():
    # synthetic orbit: follows the repelling branch for exactly the threshold extent
    p = REF.replace(delta=0.36)
    u_f = fold_point(p).fold_u
    uu = np.linspace(u_f - 0.1, u_f - 1e-3, 200)
    orbit = np.vstack([np.column_stack([uu, critical_manifold_q0(p, uu)]), [[0.01, 2.0], [0.95, 0.2]]])
    fake = CycleSummary("cycle", 100.0, 0.01, 0.95, 0.2, 2.0, 1, 0.0, (0.5, 1.0), orbit, np.arange(len(orbit)))
    with pytest.warns(ClassificationAmbiguousWarning) as rec:
        classify_cycle(fake, p)
    assert set(rec[0].message.labels) == {"canard_with_head", "relaxation"}


def test_relaxation_uniqueness():
    p = ModelParams(0.5, 0.2, 3.0, 0.3, 0.01)
    cycles = [detect_limit_cycle(p, y0) for y0 in ((0.36, 1.3), (0.9, 0.3), (0.1, 2.0))]
    for c in cycles[1:]:
        for k in ("u_min", "u_max", "v_min", "v_max"):
            assert abs(getattr(c, k) - getattr(cycles[0], k)) < 1e-4


def test_singular_limit_convergence():
    gaps = []
    for eps in (0.1, 0.01, 0.001):
        p = ModelParams(0.5, 0.2, 3.0, 0.3, eps)
        c = detect_limit_cycle(p, (0.5, 1.0))
        assert c.type == "relaxation"
        gaps.append(orbit_gap(c.orbit, singular_orbit(p)))
    assert gaps[0] > gaps[1] > gaps[2]


def test_fig1_sweep_branches():
    d_H = stability_thresholds(0.5, 0.2, 3.0).delta_H
    rows = bifurcation_sweep(FIG1, (0.21, 0.49), 15, workers=1)
    for r in rows:
        if r.delta > d_H + 0.01:
            assert r.type == "none"
        elif r.delta < d_H - 0.01:
            assert r.type != "none" and r.amplitude > 0.01


def test_sweep_continuation_and_workers_agree():
    a = bifurcation_sweep(REF, (0.37, 0.38), 5, workers=1, continuation=False)
    b = bifurcation_sweep(REF, (0.37, 0.38), 5, workers=2, continuation=False)
    assert [r.type for r in a] == [r.type for r in b]
    assert [r.u_max for r in a] == [r.u_max for r in b]


def test_sweep_empty_range():
    with pytest.raises(InvalidInputError):
        bifurcation_sweep(REF, (0.38, 0.37), 5)


@pytest.mark.slow
def test_explosion_window_eps_001():
    w = locate_explosion_window(REF, 0.01)
    assert 0.36 <= w.delta_lo <= w.delta_hi <= 0.3762
    assert w.width <= 0.005
    # the O(eps) canard curve sits within its truncation error of the window
    assert abs(maximal_canard_delta(REF, 0.01) - w.delta_hi) < 0.01**1.5 * 0.1 + 1e-5


@pytest.mark.slow
def test_explosion_window_narrows_with_eps():
    wide = locate_explosion_window(REF, 0.02)
    narrow = locate_explosion_window(REF, 0.005)
    assert narrow.width < wide.width


def test_explosion_not_detected_at_eps_one():
    with pytest.raises(ExplosionNotDetectedError):
        locate_explosion_window(REF.replace(epsilon=1.0), 1.0)


@pytest.mark.slow
def test_large_beta_has_gradual_growth():
    p = ModelParams(0.5, 0.8, 3.0, 0.2, 0.01)
    with pytest.raises(ExplosionNotDetectedError):
        locate_explosion_window(p, 0.01)
    d_H = stability_thresholds(0.5, 0.8, 3.0).delta_H
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = bifurcation_sweep(p, (d_H - 0.05, d_H - 0.002), 8, workers=1)
    amps = [r.amplitude for r in rows if r.type not in ("failed",)]
    mid = [a for a in amps if 0.05 < a < 0.8]
    # intermediate cycle sizes persist over a delta range far wider than 0.005
    assert len(mid) >= 3
