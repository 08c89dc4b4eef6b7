"""Time integration, limit-cycle detection and canard-explosion sweeps.

Integration runs by default in log-density coordinates
``(ln u, ln v)``. The model is of Kolmogorov type (each rate carries its own
density as a factor), so in these coordinates the right-hand side is smooth
and bounded, densities cannot become negative, and the long passage along
the predator axis, where u drops to 1e-30 and below before re-emerging, is
integrated with relative rather than absolute accuracy. A component that
starts exactly at 0 is frozen there, which keeps the axes invariant
exactly. ``coords="linear"`` integrates the densities directly and applies
the nonnegativity projection (clamp tiny negatives, reject large ones).
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import directed_hausdorff

from .errors import (
    ClassificationAmbiguousWarning,
    ExplosionNotDetectedError,
    InvalidInputError,
    SlowFastError,
)
from .gspt import entry_exit_point
from .integrators import PlanarDP45, StepRecord
from .kinetics import (
    ModelParams,
    coexistence_state,
    critical_manifold_q0,
    fold_point,
    hopf_threshold_formula,
    jacobian,
)

__all__ = [
    "Trajectory",
    "CycleSummary",
    "SweepRow",
    "ExplosionWindow",
    "integrate",
    "detect_limit_cycle",
    "classify_cycle",
    "bifurcation_sweep",
    "locate_explosion_window",
    "singular_orbit",
    "orbit_gap",
    "CYCLE_TYPES",
]

CYCLE_TYPES = ("none", "hopf_small", "canard_headless", "canard_with_head", "relaxation")

# classification thresholds (densities)
HOPF_SMALL_AMPLITUDE = 0.1
AXIS_DISTANCE = 0.05
TUBE_RADIUS = 0.02
TRACK_EXTENT = 0.1
AMBIGUITY_BAND = 0.01

SECTION_MATCH_RTOL = 1e-6
NO_CYCLE_AMPLITUDE = 1e-5
DECAYING_FOCUS_AMPLITUDE = 1e-3


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n, 2), columns u, v
    n_accepted: int
    n_rejected: int
    n_clamped: int = 0

    @property
    def final_state(self) -> tuple[float, float]:
        return float(self.states[-1, 0]), float(self.states[-1, 1])


@dataclass(frozen=True)
class CycleSummary:
    type: str
    period: float
    u_min: float
    u_max: float
    v_min: float
    v_max: float
    n_returns: int
    residual: float
    final_state: tuple[float, float]
    orbit: np.ndarray = field(repr=False, default_factory=lambda: np.empty((0, 2)))
    orbit_times: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    @property
    def amplitude(self) -> float:
        return self.u_max - self.u_min

    def with_type(self, kind: str) -> "CycleSummary":
        return replace(self, type=kind)


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------


class _System:
    """Vector field plus the map from internal coordinates to densities."""

    def __init__(self, p: ModelParams, y0: tuple[float, float], coords: str, tol: float):
        self.p = p
        self.coords = coords
        a, b, g, d, e = p.alpha, p.beta, p.gamma, p.delta, p.epsilon
        self.n_clamped = 0
        if coords == "log":
            self.active = (y0[0] > 0, y0[1] > 0)
            au, av = self.active
            exp = math.exp

            def rhs(x0, x1):
                u = exp(x0) if au else 0.0
                v = exp(x1) if av else 0.0
                s = 1 + a * u
                fu = g * (1 - u) * (u + b) - v / s if au else 0.0
                fv = e * (u / s - d) if av else 0.0
                return fu, fv

            self.rhs = rhs
            self.projector = None
            self.start = tuple(math.log(c) if act else 0.0 for c, act in zip(y0, self.active))
        elif coords == "linear":

            def rhs(u, v):
                s = 1 + a * u
                h = u / s
                return g * u * (1 - u) * (u + b) - h * v, e * v * (h - d)

            def projector(u, v):
                out = []
                for x in (u, v):
                    if x >= 0:
                        out.append(x)
                    elif -x < tol:
                        self.n_clamped += 1
                        out.append(0.0)
                    else:
                        return None
                return tuple(out)

            self.rhs = rhs
            self.projector = projector
            self.start = (float(y0[0]), float(y0[1]))
        else:
            raise InvalidInputError(f"coords must be 'log' or 'linear', got {coords!r}")

    def density(self, y) -> tuple[float, float]:
        if self.coords == "linear":
            return y[0], y[1]
        return (
            math.exp(y[0]) if self.active[0] else 0.0,
            math.exp(y[1]) if self.active[1] else 0.0,
        )

    def internal_u(self, u: float) -> float:
        return math.log(u) if self.coords == "log" else u


def _validate(y0, tol: float):
    if len(y0) != 2:
        raise InvalidInputError("y0 must be a pair (u, v)")
    for x in y0:
        if not math.isfinite(x) or x < 0:
            raise InvalidInputError(f"initial densities must be finite and >= 0, got {tuple(y0)}")
    if not tol > 0:
        raise InvalidInputError("tol must be positive")


def _solver(system: _System, tol: float, max_step: float) -> PlanarDP45:
    return PlanarDP45(
        system.rhs, system.start, rtol=tol, atol=tol, max_step=max_step, projector=system.projector
    )


# ---------------------------------------------------------------------------
# integrate
# ---------------------------------------------------------------------------


def integrate(
    p: ModelParams,
    y0: Sequence[float],
    t_end: float,
    tol: float = 1e-8,
    *,
    coords: str = "log",
    max_step: float = math.inf,
    t_eval: Sequence[float] | None = None,
    on_step: Callable[[float, tuple[float, float]], bool] | None = None,
) -> Trajectory:
    """Integrate from ``y0`` over ``[0, t_end]``.

    Records every accepted step, or the dense-output values at ``t_eval``.
    ``on_step(t, (u, v))`` may return True to stop early.
    """
    y0 = tuple(float(x) for x in y0)
    _validate(y0, tol)
    if not t_end > 0:
        raise InvalidInputError("t_end must be positive")
    system = _System(p, y0, coords, tol)
    solver = _solver(system, tol, max_step)

    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(np.diff(t_eval) <= 0) or t_eval[0] < 0 or t_eval[-1] > t_end:
            raise InvalidInputError("t_eval must be increasing and inside [0, t_end]")
    times, states = [0.0], [y0]
    k = 0
    if t_eval is not None:
        times, states = [], []
        while k < len(t_eval) and t_eval[k] <= 0:
            times.append(float(t_eval[k]))
            states.append(y0)
            k += 1

    while solver.t < t_end:
        rec = solver.advance(t_end)
        if t_eval is None:
            times.append(rec.t1)
            states.append(system.density(rec.y1))
        else:
            while k < len(t_eval) and t_eval[k] <= rec.t1:
                times.append(float(t_eval[k]))
                states.append(system.density(rec.interpolate(t_eval[k])))
                k += 1
        if on_step is not None and on_step(rec.t1, system.density(rec.y1)):
            break

    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states, dtype=float).reshape(-1, 2),
        n_accepted=solver.n_accepted,
        n_rejected=solver.n_rejected,
        n_clamped=system.n_clamped,
    )


# ---------------------------------------------------------------------------
# limit cycles
# ---------------------------------------------------------------------------


def default_transient(epsilon: float) -> float:
    return max(200.0, 20.0 / epsilon)


def default_max_time(epsilon: float) -> float:
    return default_transient(epsilon) + max(2000.0, 200.0 / epsilon)


def _crossing_time(rec: StepRecord, level: float) -> float:
    lo, hi = rec.t0, rec.t1
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if rec.interpolate(mid)[0] < level:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _none_summary(state, n_returns, residual=math.nan) -> CycleSummary:
    u, v = state
    return CycleSummary("none", 0.0, u, u, v, v, n_returns, residual, (u, v))


def detect_limit_cycle(
    p: ModelParams,
    y0: Sequence[float],
    transient: float | None = None,
    max_time: float | None = None,
    tol: float = 1e-9,
    *,
    coords: str = "log",
    samples_per_step: int = 4,
) -> CycleSummary:
    """Integrate past a transient and look for a periodic attractor.

    The Poincare section is ``u = u*`` crossed with u increasing. Once two
    successive crossings agree in v to 1e-6 relative the orbit is followed for
    one more period, sampling it densely and refining extrema on the Hermite
    interpolant. Returns type ``"none"`` if no such pair of returns occurs
    before ``max_time`` or the recorded orbit has negligible amplitude; the
    cycle type is otherwise assigned by :func:`classify_cycle`.
    """
    y0 = tuple(float(x) for x in y0)
    _validate(y0, tol)
    eps = p.epsilon
    transient = default_transient(eps) if transient is None else float(transient)
    max_time = default_max_time(eps) if max_time is None else float(max_time)
    if max_time <= transient:
        raise InvalidInputError("max_time must exceed transient")

    system = _System(p, y0, coords, tol)
    solver = _solver(system, tol, math.inf)
    while solver.t < transient:
        solver.advance(transient)

    if not p.coexistence_feasible or not all(system.active if coords == "log" else (True, True)):
        # no interior equilibrium to section around, or stuck on an axis
        while solver.t < max_time:
            solver.advance(max_time)
        return _none_summary(system.density(solver.y), 0)

    u_star, _ = coexistence_state(p)
    level = system.internal_u(u_star)

    def to_density(i: int, x: float) -> float:
        if coords == "linear":
            return x
        return math.exp(x)

    class Period:
        def __init__(self, t0: float, y):
            self.t0 = t0
            self.pts = [y]
            self.ts = [t0]
            self.lo = list(y)
            self.hi = list(y)

        def absorb(self, r: StepRecord, t_from: float, t_to: float):
            for i in (0, 1):
                for t, x in r.interior_extrema(i):
                    if t_from < t < t_to:
                        val = to_density(i, x)
                        self.lo[i] = min(self.lo[i], val)
                        self.hi[i] = max(self.hi[i], val)
            for j in range(1, samples_per_step + 1):
                t = t_from + (t_to - t_from) * j / samples_per_step
                y = system.density(r.interpolate(t) if t < r.t1 else r.y1)
                self.pts.append(y)
                self.ts.append(t)
                for i in (0, 1):
                    self.lo[i] = min(self.lo[i], y[i])
                    self.hi[i] = max(self.hi[i], y[i])

        def summary(self, t_end: float, n_returns: int, residual: float) -> CycleSummary:
            return CycleSummary(
                type="unclassified",
                period=t_end - self.t0,
                u_min=self.lo[0],
                u_max=self.hi[0],
                v_min=self.lo[1],
                v_max=self.hi[1],
                n_returns=n_returns,
                residual=residual,
                final_state=system.density(solver.y),
                orbit=np.asarray(self.pts),
                orbit_times=np.asarray(self.ts),
            )

    crossings: list[tuple[float, float]] = []
    current: Period | None = None
    last_complete: CycleSummary | None = None
    residual = math.nan
    converged = False
    limit = max_time
    while solver.t < limit:
        rec = solver.advance(limit)
        if rec.y0[0] < level <= rec.y1[0]:
            tc = _crossing_time(rec, level)
            vc = system.density(rec.interpolate(tc))[1]
            crossings.append((tc, vc))
            if current is not None:
                current.absorb(rec, rec.t0, tc)
                last_complete = current.summary(tc, len(crossings), residual)
                if converged:
                    break
            if len(crossings) >= 2 and not converged:
                v_prev = crossings[-2][1]
                residual = abs(vc - v_prev) / max(abs(vc), 1e-300)
                if residual <= SECTION_MATCH_RTOL:
                    # record one more full period from here
                    converged = True
                    limit = max_time + 10 * (tc - crossings[-2][0]) + 1.0
            current = Period(tc, system.density(rec.interpolate(tc)))
            current.absorb(rec, tc, rec.t1)
        elif current is not None:
            current.absorb(rec, rec.t0, rec.t1)

    if not converged:
        if last_complete is None:
            return _none_summary(system.density(solver.y), len(crossings), residual)
        # report the last complete loop, but no periodic attractor was confirmed
        return replace(last_complete, type="none", residual=residual)
    if last_complete is None or last_complete.n_returns < len(crossings) or len(crossings) < 3:
        return _none_summary(system.density(solver.y), len(crossings), residual)

    summary = replace(last_complete, residual=residual)
    amp = max(summary.u_max - summary.u_min, summary.v_max - summary.v_min)
    if amp < NO_CYCLE_AMPLITUDE:
        return summary.with_type("none")
    if amp < DECAYING_FOCUS_AMPLITUDE and _interior_stable(p):
        return summary.with_type("none")
    return summary.with_type(classify_cycle(summary, p))


def _interior_stable(p: ModelParams) -> bool:
    u, v = coexistence_state(p)
    return bool(np.trace(jacobian(p, u, v)) < 0)


def repelling_track_extent(orbit: np.ndarray, p: ModelParams, radius: float = TUBE_RADIUS) -> float:
    """u-extent of the longest run of orbit samples inside the repelling-branch tube."""
    u_f = fold_point(p).fold_u
    u, v = orbit[:, 0], orbit[:, 1]
    inside = (u < u_f) & (u > 0) & (np.abs(v - critical_manifold_q0(p, u)) < radius)
    best = 0.0
    start = None
    for i, flag in enumerate(np.append(inside, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            seg = u[start:i]
            best = max(best, float(seg.max() - seg.min()))
            start = None
    return best


def classify_cycle(cycle: CycleSummary, p: ModelParams) -> str:
    """Assign one of hopf_small, canard_headless, canard_with_head, relaxation.

    Cycles that reach the predator axis (u_min < 0.05) are canards with head
    if they first follow the repelling branch of the critical manifold for a
    u-extent of at least 0.1, and relaxation oscillations otherwise. Larger
    cycles that never reach the axis are headless canards.
    """
    if cycle.type == "none":
        raise InvalidInputError("cannot classify a non-cycle")
    amp = max(cycle.u_max - cycle.u_min, cycle.v_max - cycle.v_min)
    if amp < HOPF_SMALL_AMPLITUDE:
        return "hopf_small"
    if cycle.u_min >= AXIS_DISTANCE:
        return "canard_headless"
    if cycle.orbit.size == 0:
        raise InvalidInputError("cycle carries no orbit samples")
    extent = repelling_track_extent(cycle.orbit, p)
    label = "canard_with_head" if extent >= TRACK_EXTENT else "relaxation"
    if abs(extent - TRACK_EXTENT) < AMBIGUITY_BAND:
        warnings.warn(
            ClassificationAmbiguousWarning(
                f"repelling-branch tracking extent {extent:.4f} is within "
                f"{AMBIGUITY_BAND} of the {TRACK_EXTENT} threshold",
                ("canard_with_head", "relaxation"),
            ),
            stacklevel=2,
        )
    return label


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


SWEEP_COLUMNS = ("delta", "epsilon", "type", "period", "u_min", "u_max", "v_min", "v_max")


@dataclass(frozen=True)
class SweepRow:
    delta: float
    epsilon: float
    type: str
    period: float
    u_min: float
    u_max: float
    v_min: float
    v_max: float
    error: str = ""
    final_state: tuple[float, float] | None = None

    @property
    def amplitude(self) -> float:
        return self.u_max - self.u_min


def default_seed(p: ModelParams) -> tuple[float, float]:
    """A point near E* (or near E1 when E* is infeasible)."""
    if p.coexistence_feasible:
        u, v = coexistence_state(p)
        return (u * 1.05, v)
    return (0.9, 0.1)


def _sweep_point(p: ModelParams, seed, kwargs) -> SweepRow:
    try:
        c = detect_limit_cycle(p, seed, **kwargs)
    except (SlowFastError, ArithmeticError) as exc:
        nan = math.nan
        return SweepRow(p.delta, p.epsilon, "failed", nan, nan, nan, nan, nan, f"{type(exc).__name__}: {exc}")
    return SweepRow(p.delta, p.epsilon, c.type, c.period, c.u_min, c.u_max, c.v_min, c.v_max, "", c.final_state)


def worker_count() -> int:
    cap = os.environ.get("SLOWFAST_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise InvalidInputError(f"SLOWFAST_THREADS must be an integer, got {cap!r}") from None
    return n


def bifurcation_sweep(
    p_base: ModelParams,
    delta_range: tuple[float, float],
    n: int,
    epsilon: float | None = None,
    *,
    continuation: bool = True,
    y0: Sequence[float] | None = None,
    workers: int | None = None,
    **cycle_kwargs,
) -> list[SweepRow]:
    """Detect the attractor at ``n`` evenly spaced deltas.

    With continuation the final state at one delta seeds the next, so points
    run sequentially. Without it every point starts from ``y0`` (default: near
    its own E*) and points may run in a process pool. Failures are recorded
    in the row's ``error`` field and the sweep carries on.
    """
    if n < 2:
        raise InvalidInputError("a sweep needs n >= 2 points")
    lo, hi = map(float, delta_range)
    if not (math.isfinite(lo) and math.isfinite(hi)) or not 0 < lo < hi:
        raise InvalidInputError(f"delta_range must satisfy 0 < lo < hi, got {delta_range}")
    eps = p_base.epsilon if epsilon is None else epsilon
    deltas = np.linspace(lo, hi, n)
    params = [p_base.replace(delta=float(d), epsilon=eps) for d in deltas]

    if continuation:
        rows = []
        seed = tuple(y0) if y0 is not None else default_seed(params[0])
        for p in params:
            row = _sweep_point(p, seed, cycle_kwargs)
            rows.append(row)
            if row.final_state is not None and min(row.final_state) > 0:
                seed = row.final_state
        return rows

    seeds = [tuple(y0) if y0 is not None else default_seed(p) for p in params]
    workers = worker_count() if workers is None else max(1, workers)
    if workers == 1:
        return [_sweep_point(p, s, cycle_kwargs) for p, s in zip(params, seeds)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sweep_point, p, s, cycle_kwargs) for p, s in zip(params, seeds)]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# explosion window
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExplosionWindow:
    delta_lo: float  # largest delta seen with amplitude > high
    delta_hi: float  # smallest delta seen with amplitude < low
    epsilon: float
    evaluations: int

    @property
    def width(self) -> float:
        return self.delta_hi - self.delta_lo


def locate_explosion_window(
    p_base: ModelParams,
    epsilon: float | None = None,
    *,
    high: float = 0.8,
    low: float = 0.3,
    xtol: float = 1e-14,
    max_width: float = 0.01,
    tol: float = 1e-11,
    max_scan: int = 40,
) -> ExplosionWindow:
    """Bracket the delta-interval over which the cycle amplitude ``u_max - u_min``
    jumps from below ``low`` to above ``high``.

    Scans geometrically downward from the Hopf threshold until a large cycle
    appears, then bisects both edges together. Raises
    :class:`ExplosionNotDetectedError` if no large cycle is found or the
    jump is spread over more than ``max_width``.
    """
    eps = p_base.epsilon if epsilon is None else epsilon
    d_H = hopf_threshold_formula(p_base.alpha, p_base.beta)
    evals = 0

    def amplitude(delta: float) -> float:
        nonlocal evals
        evals += 1
        p = p_base.replace(delta=delta, epsilon=eps)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClassificationAmbiguousWarning)
            c = detect_limit_cycle(p, default_seed(p), tol=tol)
        # an unconfirmed cycle still reports its last loop
        return c.u_max - c.u_min

    # bracket: a has amp > high, b has amp < low
    upper = d_H
    step = 1e-5
    found = None
    for _ in range(max_scan):
        d = d_H - step
        if d <= 0:
            break
        amp = amplitude(d)
        if amp > high:
            found = d
            break
        if amp < low:
            upper = d
        step *= 2
    if found is None:
        raise ExplosionNotDetectedError(
            f"no cycle with amplitude > {high} below delta_H={d_H:.6g} at epsilon={eps:g}"
        )
    # lo edge: a (amp > high) < b (amp <= high); hi edge: c (amp >= low) < d (amp < low)
    a, b = found, upper
    c, d = found, upper
    lo_done = hi_done = False
    while True:
        lo_done = lo_done or b - a <= xtol
        hi_done = hi_done or d - c <= xtol
        if lo_done and hi_done:
            break
        if not lo_done:
            mid = 0.5 * (a + b)
            if mid in (a, b):
                lo_done = True
                continue
        else:
            mid = 0.5 * (c + d)
            if mid in (c, d):
                hi_done = True
                continue
        amp = amplitude(mid)
        if amp > high:
            a = max(a, mid)
            c = max(c, mid)
        elif amp < low:
            b = min(b, mid)
            d = min(d, mid)
        else:
            b = min(b, mid)
            c = max(c, mid)
    window = ExplosionWindow(delta_lo=a, delta_hi=d, epsilon=eps, evaluations=evals)
    if window.width > max_width:
        raise ExplosionNotDetectedError(
            f"amplitude grows over a delta-window of width {window.width:.3g} > {max_width}; "
            "no sharp explosion"
        )
    return window


# ---------------------------------------------------------------------------
# singular orbit
# ---------------------------------------------------------------------------


def singular_orbit(p: ModelParams, n: int = 2000) -> np.ndarray:
    """Polyline for the singular relaxation orbit.

    Bottom fast jump at the exit level v0 from the predator axis to the
    attracting branch, slow climb to the fold, top fast jump left to the
    axis, slow descent along the axis to v0.
    """
    geo = fold_point(p)
    u_f, v_f = geo.fold_u, geo.fold_v
    v0 = entry_exit_point(p, v_f).v0
    # attracting-branch point at v0: q0 decreasing on (u_f, 1)
    from scipy.optimize import brentq

    u_land = brentq(lambda u: critical_manifold_q0(p, u) - v0, u_f, 1.0, xtol=1e-14)
    bottom = np.column_stack([np.linspace(0.0, u_land, n), np.full(n, v0)])
    uu = np.linspace(u_land, u_f, n)
    branch = np.column_stack([uu, critical_manifold_q0(p, uu)])
    top = np.column_stack([np.linspace(u_f, 0.0, n), np.full(n, v_f)])
    axis = np.column_stack([np.zeros(n), np.linspace(v_f, v0, n)])
    return np.vstack([bottom, branch, top, axis])


def orbit_gap(orbit: np.ndarray, reference: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two point clouds in the (u, v) plane."""
    return max(directed_hausdorff(orbit, reference)[0], directed_hausdorff(reference, orbit)[0])
