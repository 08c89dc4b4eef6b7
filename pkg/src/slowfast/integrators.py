"""Dormand-Prince 5(4) stepper for autonomous planar systems.

Written against plain Python floats: the model is two-dimensional, so
per-step numpy overhead would dominate the arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import StiffnessError

Rhs = Callable[[float, float], tuple[float, float]]
# optional hook mapping a trial state to an accepted state or None (reject)
Projector = Callable[[float, float], "tuple[float, float] | None"]

MIN_STEP = 1e-14

# Butcher tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# fifth minus fourth order weights
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

SAFETY, MIN_FACTOR, MAX_FACTOR = 0.9, 0.2, 5.0


@dataclass
class StepRecord:
    """One accepted step, enough for cubic Hermite interpolation."""

    t0: float
    y0: tuple[float, float]
    f0: tuple[float, float]
    t1: float
    y1: tuple[float, float]
    f1: tuple[float, float]

    def interpolate(self, t: float) -> tuple[float, float]:
        h = self.t1 - self.t0
        s = (t - self.t0) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return tuple(
            h00 * a + h10 * h * fa + h01 * b + h11 * h * fb
            for a, fa, b, fb in zip(self.y0, self.f0, self.y1, self.f1)
        )

    def interior_extrema(self, i: int) -> list[tuple[float, float]]:
        """Local extrema ``(t, y_i)`` of the Hermite cubic strictly inside the step."""
        h = self.t1 - self.t0
        a, b = self.y0[i], self.y1[i]
        fa, fb = h * self.f0[i], h * self.f1[i]
        # p(s) = c3 s^3 + c2 s^2 + c1 s + c0
        c3 = 2 * a + fa - 2 * b + fb
        c2 = -3 * a - 2 * fa + 3 * b - fb
        c1 = fa
        roots = []
        qa, qb, qc = 3 * c3, 2 * c2, c1
        if abs(qa) < 1e-300:
            if abs(qb) > 1e-300:
                roots.append(-qc / qb)
        else:
            disc = qb * qb - 4 * qa * qc
            if disc >= 0:
                sq = math.sqrt(disc)
                roots.extend([(-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)])
        out = []
        for s in roots:
            if 0 < s < 1:
                t = self.t0 + s * h
                out.append((t, self.interpolate(t)[i]))
        return out


class PlanarDP45:
    """Adaptive Dormand-Prince 5(4) with FSAL and max-norm error control.

    Trial steps that overflow, produce non-finite values, or are refused by
    ``projector`` count as rejected and the step is halved.
    """

    def __init__(
        self,
        rhs: Rhs,
        y0: tuple[float, float],
        t0: float = 0.0,
        *,
        rtol: float = 1e-8,
        atol: float = 1e-8,
        h0: float | None = None,
        max_step: float = math.inf,
        projector: Projector | None = None,
    ):
        self.rhs = rhs
        self.t = float(t0)
        self.y = (float(y0[0]), float(y0[1]))
        self.rtol, self.atol = rtol, atol
        self.max_step = max_step
        self.projector = projector
        self.f = rhs(*self.y)
        self.h = h0 if h0 is not None else self._initial_step()
        self.n_accepted = 0
        self.n_rejected = 0

    def _initial_step(self) -> float:
        scale = [self.atol + self.rtol * abs(x) for x in self.y]
        d0 = max(abs(x) / s for x, s in zip(self.y, scale))
        d1 = max(abs(x) / s for x, s in zip(self.f, scale))
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        return min(h, self.max_step)

    def _attempt(self, h: float):
        y0, y1 = self.y
        k1 = self.f
        rhs = self.rhs
        k2 = rhs(y0 + h * A21 * k1[0], y1 + h * A21 * k1[1])
        k3 = rhs(y0 + h * (A31 * k1[0] + A32 * k2[0]), y1 + h * (A31 * k1[1] + A32 * k2[1]))
        k4 = rhs(
            y0 + h * (A41 * k1[0] + A42 * k2[0] + A43 * k3[0]),
            y1 + h * (A41 * k1[1] + A42 * k2[1] + A43 * k3[1]),
        )
        k5 = rhs(
            y0 + h * (A51 * k1[0] + A52 * k2[0] + A53 * k3[0] + A54 * k4[0]),
            y1 + h * (A51 * k1[1] + A52 * k2[1] + A53 * k3[1] + A54 * k4[1]),
        )
        k6 = rhs(
            y0 + h * (A61 * k1[0] + A62 * k2[0] + A63 * k3[0] + A64 * k4[0] + A65 * k5[0]),
            y1 + h * (A61 * k1[1] + A62 * k2[1] + A63 * k3[1] + A64 * k4[1] + A65 * k5[1]),
        )
        n0 = y0 + h * (B1 * k1[0] + B3 * k3[0] + B4 * k4[0] + B5 * k5[0] + B6 * k6[0])
        n1 = y1 + h * (B1 * k1[1] + B3 * k3[1] + B4 * k4[1] + B5 * k5[1] + B6 * k6[1])
        k7 = rhs(n0, n1)
        e0 = h * (E1 * k1[0] + E3 * k3[0] + E4 * k4[0] + E5 * k5[0] + E6 * k6[0] + E7 * k7[0])
        e1 = h * (E1 * k1[1] + E3 * k3[1] + E4 * k4[1] + E5 * k5[1] + E6 * k6[1] + E7 * k7[1])
        s0 = self.atol + self.rtol * max(abs(y0), abs(n0))
        s1 = self.atol + self.rtol * max(abs(y1), abs(n1))
        err = max(abs(e0) / s0, abs(e1) / s1)
        return (n0, n1), k7, err

    def advance(self, t_limit: float = math.inf) -> StepRecord:
        """Take one accepted step, never passing ``t_limit``."""
        h = min(self.h, self.max_step)
        clipped = False
        if self.t + h >= t_limit:
            h = t_limit - self.t
            clipped = True
        while True:
            if h < MIN_STEP:
                raise StiffnessError(
                    f"step size {h:.3g} underflowed at t={self.t:.6g}; "
                    "loosen tol or shorten t_end"
                )
            try:
                y_new, f_new, err = self._attempt(h)
                ok = math.isfinite(err) and all(map(math.isfinite, y_new))
            except (OverflowError, ZeroDivisionError, ValueError):
                ok = False
            if ok and err <= 1.0 and self.projector is not None:
                projected = self.projector(*y_new)
                if projected is None:
                    ok = False
                elif projected != y_new:
                    y_new = projected
                    f_new = self.rhs(*y_new)
            if not ok:
                self.n_rejected += 1
                h *= 0.5
                clipped = False
                continue
            if err > 1.0:
                self.n_rejected += 1
                h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
                clipped = False
                continue
            break
        t_new = t_limit if clipped else self.t + h
        record = StepRecord(self.t, self.y, self.f, t_new, y_new, f_new)
        factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** -0.2))
        if not clipped or factor < 1:
            self.h = h * factor
        self.t, self.y, self.f = t_new, y_new, f_new
        self.n_accepted += 1
        return record
