"""Explicit finite-difference solver for the reaction-diffusion model.

Cell-centred grid, forward Euler in time, 3-point (1D) or 5-point (2D)
Laplacian, no-flux boundaries through ghost cells that mirror the adjacent
interior cell. The 2D update is split into row tiles that can run on a
thread pool; every cell is computed by the same arithmetic regardless of
tiling, so results are bitwise independent of the tile count.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numba
import numpy as np

from .errors import BlowUpError, ClampWarning, ConfigurationError, FrontNotFoundError, InvalidInputError
from .kinetics import ModelParams, coexistence_state

__all__ = [
    "Field",
    "SpatialAverageSeries",
    "SimulationResult",
    "FrontRecord",
    "DivergenceResult",
    "make_initial_condition",
    "check_time_step",
    "step",
    "simulate",
    "measure_front_speed",
    "divergence_diagnostic",
]

CFL_SAFETY = 0.9
REACTION_LIMIT = 0.5
SENSITIVE_GROWTH = 1e4


@dataclass(frozen=True)
class Field:
    """Densities on a uniform grid; 2D arrays are indexed ``[y, x]``."""

    u: np.ndarray
    v: np.ndarray
    dx: float = 1.0
    t: float = 0.0
    boundary: str = "no-flux"

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=np.float64)
        v = np.ascontiguousarray(self.v, dtype=np.float64)
        if u.shape != v.shape:
            raise InvalidInputError(f"u and v shapes differ: {u.shape} vs {v.shape}")
        if u.ndim not in (1, 2) or min(u.shape) < 1:
            raise InvalidInputError(f"fields must be non-empty 1D or 2D arrays, got shape {u.shape}")
        if not self.dx > 0:
            raise InvalidInputError("dx must be positive")
        if self.boundary != "no-flux":
            raise InvalidInputError("only no-flux boundaries are supported")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def dims(self) -> int:
        return self.u.ndim

    @property
    def nx(self) -> int:
        return self.u.shape[-1]

    @property
    def ny(self) -> int:
        return self.u.shape[0] if self.dims == 2 else 1

    @property
    def length(self) -> float:
        return self.nx * self.dx

    def x(self) -> np.ndarray:
        """Cell-centre coordinates along x."""
        return (np.arange(self.nx) + 0.5) * self.dx

    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dx

    def mean(self) -> tuple[float, float]:
        # numpy's pairwise summation, in a fixed order
        return float(np.mean(self.u)), float(np.mean(self.v))

    def mass(self) -> tuple[float, float]:
        cell = self.dx**self.dims
        return float(np.sum(self.u) * cell), float(np.sum(self.v) * cell)


@dataclass(frozen=True)
class SpatialAverageSeries:
    t: np.ndarray
    mean_u: np.ndarray
    mean_v: np.ndarray


@dataclass(frozen=True)
class SimulationResult:
    final: Field
    snapshots: list[Field]
    averages: SpatialAverageSeries
    n_steps: int
    n_clamped: int


# ---------------------------------------------------------------------------
# initial conditions
# ---------------------------------------------------------------------------


def _grid(nx: int, ny: int | None, dx: float):
    if nx < 1 or (ny is not None and ny < 1):
        raise InvalidInputError(f"grid must have at least one cell per axis, got nx={nx}, ny={ny}")
    x = (np.arange(nx) + 0.5) * dx
    if ny is None:
        return x, None
    y = (np.arange(ny) + 0.5) * dx
    return x, y


def _inside_ellipse(X, Y, xc, yc, a2, b2):
    if a2 <= 0 or b2 <= 0:
        return np.zeros(X.shape, dtype=bool)
    return (X - xc) ** 2 / a2 + (Y - yc) ** 2 / b2 <= 1


def make_initial_condition(kind: str, *, nx: int, ny: int | None = None, dx: float = 1.0,
                           p: ModelParams | None = None, **ic) -> Field:
    """Build an initial field.

    ``step_1d``
        ``u_core``/``v_core`` on ``x <= x_split`` (``v_split`` for v, default
        ``x_split``), ``u_far``/``v_far`` elsewhere. Defaults are E* inside
        ``[0, 3]`` and ``(1, 0)`` outside.
    ``elliptic_2d``
        ``u0`` inside ``(x-x1)^2/D11 + (y-y1)^2/D12 <= 1``, ``v0`` inside the
        matching ellipse with ``x2, y2, D21, D22``, 0 outside. Centres default
        to the 300-wide reference layout scaled to the domain length.
    ``perturbed_2d``
        ``u* - e1 (x - 0.1 y - 225 s)(x - 0.1 y - 675 s)`` and
        ``v* - e2 (x - 450 s) - e3 (y - 450 s)`` with ``s = L / 900``.
    """
    x, y = _grid(nx, ny, dx)
    if kind == "step_1d":
        if ny is not None:
            raise InvalidInputError("step_1d is one-dimensional")
        if p is not None and p.coexistence_feasible:
            us, vs = coexistence_state(p)
        else:
            us, vs = ic.get("u_core"), ic.get("v_core")
        u_core = ic.get("u_core", us)
        v_core = ic.get("v_core", vs)
        if u_core is None or v_core is None:
            raise InvalidInputError("step_1d needs u_core and v_core (or feasible params)")
        x_split = ic.get("x_split", 3.0)
        v_split = ic.get("v_split", x_split)
        u = np.where(x <= x_split, u_core, ic.get("u_far", 1.0))
        v = np.where(x <= v_split, v_core, ic.get("v_far", 0.0))
        return Field(u, v, dx)

    if ny is None:
        raise InvalidInputError(f"{kind} needs ny")
    X, Y = np.meshgrid(x, y)
    if kind == "elliptic_2d":
        s = nx * dx / 300.0
        u_mask = _inside_ellipse(X, Y, ic.get("x1", 153.5 * s), ic.get("y1", 145.0 * s),
                                 ic.get("d11", 12.5), ic.get("d12", 12.5))
        v_mask = _inside_ellipse(X, Y, ic.get("x2", 150.0 * s), ic.get("y2", 150.0 * s),
                                 ic.get("d21", 5.0), ic.get("d22", 10.0))
        u = np.where(u_mask, ic.get("u0", 1.0), 0.0)
        v = np.where(v_mask, ic.get("v0", 0.2), 0.0)
        return Field(u, v, dx)

    if kind == "perturbed_2d":
        if p is None or not p.coexistence_feasible:
            raise InvalidInputError("perturbed_2d needs params with a feasible E*")
        us, vs = coexistence_state(p)
        s = nx * dx / 900.0
        e1, e2, e3 = ic.get("e1", 2e-7), ic.get("e2", 3e-5), ic.get("e3", 2e-4)
        w = X - 0.1 * Y
        u = us - e1 * (w - 225 * s) * (w - 675 * s)
        v = vs - e2 * (X - 450 * s) - e3 * (Y - 450 * s)
        n_neg = int(np.sum(u < 0) + np.sum(v < 0))
        if n_neg:
            warnings.warn(ClampWarning(f"clamped {n_neg} negative initial densities to 0"), stacklevel=2)
            u, v = np.maximum(u, 0.0), np.maximum(v, 0.0)
        return Field(u, v, dx)

    raise InvalidInputError(f"unknown initial condition kind {kind!r}")


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _kernel_1d(u, v, un, vn, a, b, g, dl, eps, d, dt, inv_dx2, reactions):
    n = u.shape[0]
    clamped = 0
    bad = False
    for i in range(n):
        ul = u[i - 1] if i > 0 else u[i]
        ur = u[i + 1] if i < n - 1 else u[i]
        vl = v[i - 1] if i > 0 else v[i]
        vr = v[i + 1] if i < n - 1 else v[i]
        lap_u = ((ul + ur) - 2.0 * u[i]) * inv_dx2
        lap_v = ((vl + vr) - 2.0 * v[i]) * inv_dx2
        fu = 0.0
        fv = 0.0
        if reactions:
            h = u[i] / (1.0 + a * u[i])
            fu = g * u[i] * (1.0 - u[i]) * (u[i] + b) - h * v[i]
            fv = eps * v[i] * (h - dl)
        x = u[i] + dt * (fu + lap_u)
        y = v[i] + dt * (fv + d * lap_v)
        if not (math.isfinite(x) and math.isfinite(y)):
            bad = True
        if x < 0.0:
            x = 0.0
            clamped += 1
        if y < 0.0:
            y = 0.0
            clamped += 1
        un[i] = x
        vn[i] = y
    return clamped, bad


@numba.njit(cache=True, nogil=True)
def _kernel_2d(u, v, un, vn, r0, r1, a, b, g, dl, eps, d, dt, inv_dx2, reactions):
    ny, nx = u.shape
    clamped = 0
    bad = False
    for j in range(r0, r1):
        jd = j - 1 if j > 0 else j
        ju = j + 1 if j < ny - 1 else j
        for i in range(nx):
            il = i - 1 if i > 0 else i
            ir = i + 1 if i < nx - 1 else i
            c = u[j, i]
            w = v[j, i]
            # pair opposite neighbours first so reflections leave the sum unchanged
            lap_u = ((u[j, il] + u[j, ir]) + (u[jd, i] + u[ju, i]) - 4.0 * c) * inv_dx2
            lap_v = ((v[j, il] + v[j, ir]) + (v[jd, i] + v[ju, i]) - 4.0 * w) * inv_dx2
            fu = 0.0
            fv = 0.0
            if reactions:
                h = c / (1.0 + a * c)
                fu = g * c * (1.0 - c) * (c + b) - h * w
                fv = eps * w * (h - dl)
            x = c + dt * (fu + lap_u)
            y = w + dt * (fv + d * lap_v)
            if not (math.isfinite(x) and math.isfinite(y)):
                bad = True
            if x < 0.0:
                x = 0.0
                clamped += 1
            if y < 0.0:
                y = 0.0
                clamped += 1
            un[j, i] = x
            vn[j, i] = y
    return clamped, bad


class _Stepper:
    """Reusable buffers and tile plan for repeated steps on one grid."""

    def __init__(self, field: Field, p: ModelParams, dt: float, tiles: int, reactions: bool):
        self.p = p
        self.dt = dt
        self.reactions = reactions
        self.inv_dx2 = 1.0 / (field.dx * field.dx)
        self.u = field.u.copy()
        self.v = field.v.copy()
        self.un = np.empty_like(self.u)
        self.vn = np.empty_like(self.v)
        self.dims = field.dims
        tiles = max(1, int(tiles))
        if self.dims == 2:
            ny = self.u.shape[0]
            tiles = min(tiles, ny)
            edges = np.linspace(0, ny, tiles + 1).astype(int)
            self.bounds = [(int(edges[k]), int(edges[k + 1])) for k in range(tiles)]
        else:
            self.bounds = [(0, self.u.shape[0])]
        self.pool = ThreadPoolExecutor(max_workers=len(self.bounds)) if len(self.bounds) > 1 else None

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def _args(self):
        p = self.p
        return (p.alpha, p.beta, p.gamma, p.delta, p.epsilon, p.d, self.dt, self.inv_dx2, self.reactions)

    def advance(self, step_index: int) -> int:
        args = self._args()
        if self.dims == 1:
            clamped, bad = _kernel_1d(self.u, self.v, self.un, self.vn, *args)
        elif self.pool is None:
            r0, r1 = self.bounds[0]
            clamped, bad = _kernel_2d(self.u, self.v, self.un, self.vn, r0, r1, *args)
        else:
            futures = [
                self.pool.submit(_kernel_2d, self.u, self.v, self.un, self.vn, r0, r1, *args)
                for r0, r1 in self.bounds
            ]
            results = [f.result() for f in futures]
            clamped = sum(r[0] for r in results)
            bad = any(r[1] for r in results)
        if bad:
            raise BlowUpError(f"non-finite density at step {step_index}", step_index)
        self.u, self.un = self.un, self.u
        self.v, self.vn = self.vn, self.v
        return clamped


# ---------------------------------------------------------------------------
# public stepping API
# ---------------------------------------------------------------------------


def max_reaction_slope(p: ModelParams, u: np.ndarray, v: np.ndarray) -> float:
    """max |df/du| over the given states."""
    s = 1 + p.alpha * u
    f_u = p.gamma * (-3 * u * u + 2 * (1 - p.beta) * u + p.beta) - v / (s * s)
    return float(np.max(np.abs(f_u)))


def check_time_step(field: Field, p: ModelParams, dt: float, reactions: bool = True) -> None:
    """Forward-Euler stability: diffusive CFL limit and, with reactions on, a reaction-slope limit."""
    if not dt > 0 or not math.isfinite(dt):
        raise ConfigurationError(f"dt must be positive and finite, got {dt}")
    limit = CFL_SAFETY * field.dx**2 / (2 * max(1.0, p.d) * field.dims)
    if dt > limit:
        raise ConfigurationError(
            f"dt={dt:g} exceeds the diffusive stability limit {limit:.6g} "
            f"(0.9 dx^2 / (2 max(1, d) dims))"
        )
    if not reactions:
        return
    slope = max_reaction_slope(p, field.u, field.v)
    if dt * slope >= REACTION_LIMIT:
        raise ConfigurationError(
            f"dt * max|f_u| = {dt * slope:.3g} >= {REACTION_LIMIT}; reduce dt"
        )


def step(field: Field, p: ModelParams, dt: float, *, reactions: bool = True, tiles: int = 1) -> Field:
    """One forward-Euler step. ``reactions=False`` leaves pure diffusion."""
    check_time_step(field, p, dt, reactions)
    st = _Stepper(field, p, dt, tiles, reactions)
    try:
        st.advance(0)
    finally:
        st.close()
    return replace(field, u=st.u, v=st.v, t=field.t + dt)


def simulate(
    field0: Field,
    p: ModelParams,
    dt: float,
    t_end: float,
    snapshot_every: float | None = None,
    *,
    tiles: int = 1,
    reactions: bool = True,
) -> SimulationResult:
    """Step from ``field0.t`` to ``t_end`` recording snapshots and spatial means.

    The number of steps is ``round((t_end - t0) / dt)``; snapshots are taken
    every ``round(snapshot_every / dt)`` steps (plus the initial field).
    """
    check_time_step(field0, p, dt, reactions)
    n_steps = int(round((t_end - field0.t) / dt))
    if n_steps < 0:
        raise InvalidInputError("t_end precedes the field's time")
    every = None
    if snapshot_every is not None:
        every = max(1, int(round(snapshot_every / dt)))
    t = np.empty(n_steps + 1)
    mu = np.empty(n_steps + 1)
    mv = np.empty(n_steps + 1)
    t[0] = field0.t
    mu[0], mv[0] = field0.mean()
    snaps = [field0] if every is not None else []
    st = _Stepper(field0, p, dt, tiles, reactions)
    clamped = 0
    try:
        for k in range(1, n_steps + 1):
            clamped += st.advance(k)
            t[k] = field0.t + k * dt
            mu[k] = np.mean(st.u)
            mv[k] = np.mean(st.v)
            if every is not None and k % every == 0:
                snaps.append(replace(field0, u=st.u.copy(), v=st.v.copy(), t=t[k]))
    finally:
        st.close()
    final = replace(field0, u=st.u.copy(), v=st.v.copy(), t=t[-1])
    return SimulationResult(final, snaps, SpatialAverageSeries(t, mu, mv), n_steps, clamped)


# ---------------------------------------------------------------------------
# fronts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrontRecord:
    t: np.ndarray
    x_front: np.ndarray
    speed: float
    residual: float  # RMS deviation from the fitted line
    n_fit: int


def front_position(field: Field, species: str, level: float) -> float:
    """Rightmost x where the profile drops through ``level``, linearly interpolated."""
    if field.dims != 1:
        raise InvalidInputError("front positions are defined for 1D fields")
    z = field.u if species == "u" else field.v if species == "v" else None
    if z is None:
        raise InvalidInputError(f"species must be 'u' or 'v', got {species!r}")
    above = z >= level
    idx = np.nonzero(above[:-1] & ~above[1:])[0]
    if idx.size == 0:
        raise FrontNotFoundError(f"no crossing of {species}={level:g} at t={field.t:g}")
    i = int(idx[-1])
    x = field.x()
    frac = (z[i] - level) / (z[i] - z[i + 1])
    return float(x[i] + frac * (x[i + 1] - x[i]))


def measure_front_speed(
    snapshots: Sequence[Field],
    species: str = "v",
    level: float | None = None,
    *,
    x_max: float | None = None,
) -> FrontRecord:
    """Least-squares front speed over the last half of the front trace.

    Snapshots without a crossing, or whose front lies beyond ``x_max``
    (e.g. close to the far boundary), are left out of the trace.
    """
    if level is None:
        raise InvalidInputError("a level is required")
    ts, xs = [], []
    for f in snapshots:
        try:
            xf = front_position(f, species, level)
        except FrontNotFoundError:
            continue
        if x_max is not None and xf > x_max:
            continue
        ts.append(f.t)
        xs.append(xf)
    if not ts:
        raise FrontNotFoundError(f"no snapshot crosses {species}={level:g}")
    ts_a, xs_a = np.asarray(ts), np.asarray(xs)
    half = ts_a.size // 2
    tf, xf = ts_a[half:], xs_a[half:]
    if tf.size < 5:
        raise FrontNotFoundError(f"need at least 5 front samples in the fit, got {tf.size}")
    slope, intercept = np.polyfit(tf, xf, 1)
    resid = float(np.sqrt(np.mean((xf - (slope * tf + intercept)) ** 2)))
    return FrontRecord(ts_a, xs_a, float(slope), resid, int(tf.size))


# ---------------------------------------------------------------------------
# twin-run divergence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DivergenceResult:
    initial_gap: float
    final_gap: float
    growth: float
    label: str  # "sensitive" or "non-sensitive"


def divergence_diagnostic(
    field0: Field,
    p: ModelParams,
    dt: float,
    t_end: float,
    perturbation: float = 1e-8,
    *,
    cell: tuple[int, int] | None = None,
    tiles: int = 1,
) -> DivergenceResult:
    """Growth of the L2 gap between two runs differing in one cell's prey density."""
    if field0.dims != 2:
        raise InvalidInputError("the divergence diagnostic runs on 2D fields")
    j, i = cell if cell is not None else (field0.ny // 2, field0.nx // 2)
    u2 = field0.u.copy()
    u2[j, i] += perturbation
    twin = replace(field0, u=u2)
    gap0 = float(np.sqrt(np.sum((twin.u - field0.u) ** 2 + (twin.v - field0.v) ** 2)))
    a = simulate(field0, p, dt, t_end, tiles=tiles).final
    b = simulate(twin, p, dt, t_end, tiles=tiles).final
    gap = float(np.sqrt(np.sum((a.u - b.u) ** 2 + (a.v - b.v) ** 2)))
    growth = gap / gap0
    return DivergenceResult(gap0, gap, growth, "sensitive" if growth > SENSITIVE_GROWTH else "non-sensitive")
