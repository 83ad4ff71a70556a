"""Adaptive Dormand-Prince 5(4) integration, Poincare returns and cycle search."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .exceptions import (
    BlowUpError,
    CycleNotFoundError,
    IntegrationError,
    NoReturnError,
    PreconditionError,
)

logger = logging.getLogger(__name__)

Rhs = Callable[[float, np.ndarray], np.ndarray]

# Dormand-Prince tableau; the last row of A equals B (first same as last)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# b5 - b4 for the embedded error estimate
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
PI_ALPHA = 0.17
PI_BETA = 0.04
MIN_STEP_REL = 1e-14
NORM_LIMIT = 1e8
MAX_STEPS = 500_000


@dataclass
class Trajectory:
    """Accepted steps of an integration, with cubic Hermite dense output."""

    times: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    errors: np.ndarray  # scaled error norm of each accepted step

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise PreconditionError("times and states differ in length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise PreconditionError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def interpolate(self, t: float) -> np.ndarray:
        if not self.times[0] <= t <= self.times[-1]:
            raise PreconditionError(
                f"t={t} outside [{self.times[0]}, {self.times[-1]}]"
            )
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.times) - 2)
        return _hermite(
            self.times[i],
            self.states[i],
            self.derivatives[i],
            self.times[i + 1],
            self.states[i + 1],
            self.derivatives[i + 1],
            t,
        )

    def dense(self, per_step: int = 4) -> np.ndarray:
        """States on the step points plus ``per_step - 1`` interior points per step."""
        if len(self.times) < 2 or per_step <= 1:
            return self.states.copy()
        out = [self.states[0]]
        thetas = np.arange(1, per_step + 1) / per_step
        for i in range(len(self.times) - 1):
            t0, t1 = self.times[i], self.times[i + 1]
            for theta in thetas:
                out.append(
                    _hermite(
                        t0,
                        self.states[i],
                        self.derivatives[i],
                        t1,
                        self.states[i + 1],
                        self.derivatives[i + 1],
                        t0 + theta * (t1 - t0),
                    )
                )
        return np.array(out)


@dataclass(frozen=True)
class Section:
    """The line state[index] == level of a planar flow.

    A crossing counts as a return when the free coordinate lies on ``side``
    of ``origin``; section offsets are measured from ``origin`` along ``side``.
    """

    index: int
    level: float = 0.0
    side: int = 1
    origin: float = 0.0

    def __post_init__(self):
        if self.index not in (0, 1):
            raise PreconditionError("section index must be 0 or 1 for a planar flow")
        if self.side not in (-1, 1):
            raise PreconditionError("section side must be +1 or -1")

    @property
    def free_index(self) -> int:
        return 1 - self.index

    def gap(self, state: np.ndarray) -> float:
        return float(state[self.index] - self.level)

    def offset(self, state: np.ndarray) -> float:
        return self.side * float(state[self.free_index] - self.origin)

    def point(self, offset: float) -> np.ndarray:
        state = np.empty(2)
        state[self.index] = self.level
        state[self.free_index] = self.origin + self.side * offset
        return state


@dataclass
class Cycle:
    lam: float
    period: float
    anchor: np.ndarray
    amplitude: float
    samples: Trajectory = field(repr=False)
    offset: float = 0.0
    multiplier: float = float("nan")
    iterations: int = 0


def _hermite(t0, y0, f0, t1, y1, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    s2, s3 = s * s, s * s * s
    return (
        (2 * s3 - 3 * s2 + 1) * y0
        + (s3 - 2 * s2 + s) * h * f0
        + (-2 * s3 + 3 * s2) * y1
        + (s3 - s2) * h * f1
    )


def _evaluate(rhs: Rhs, t: float, y: np.ndarray) -> np.ndarray:
    try:
        value = np.asarray(rhs(t, y), dtype=float)
    except OverflowError as exc:
        raise BlowUpError(f"vector field overflowed at t={t:.6g}", t, y) from exc
    if not np.all(np.isfinite(value)):
        raise BlowUpError(f"vector field is not finite at t={t:.6g}", t, y)
    return value


def _rk_step(rhs: Rhs, t: float, y: np.ndarray, f: np.ndarray, h: float):
    """One Dormand-Prince step; returns (y_new, f_new, error_vector)."""
    k = [f]
    for i, row in enumerate(_A):
        yi = y + h * np.dot(row, k)
        k.append(_evaluate(rhs, t + _C[i + 1] * h, yi))
    y_new = y + h * np.dot(_B, k)
    f_new = _evaluate(rhs, t + h, y_new)
    k.append(f_new)
    err = h * np.dot(_E, k)
    return y_new, f_new, err


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(rhs, t0, y0, f0, rtol, atol, span) -> float:
    scale = atol + rtol * np.abs(y0)
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = _evaluate(rhs, t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def _steps(
    rhs: Rhs,
    t0: float,
    y0: np.ndarray,
    t_end: float,
    rtol: float,
    atol: float,
    max_steps: int = MAX_STEPS,
    norm_limit: float = NORM_LIMIT,
) -> Iterator[Tuple[float, np.ndarray, np.ndarray, float, np.ndarray, np.ndarray, float]]:
    """Yield accepted steps (t, y, f, t_new, y_new, f_new, err_norm) up to t_end."""
    if rtol <= 0 or atol <= 0:
        raise PreconditionError("rtol and atol must be positive")
    t, y = float(t0), np.array(y0, dtype=float)
    f = _evaluate(rhs, t, y)
    span = t_end - t
    h = _initial_step(rhs, t, y, f, rtol, atol, span)
    h_min = MIN_STEP_REL * max(abs(t_end), 1e-300)
    err_prev = 1e-4
    steps = 0

    while t < t_end:
        if steps >= max_steps:
            raise IntegrationError(f"step budget {max_steps} exhausted at t={t:.6g}")
        h = min(h, t_end - t)
        if h < h_min and t + h < t_end:
            raise BlowUpError(
                f"step size {h:.3e} underflowed at t={t:.6g}", t, y
            )
        y_new, f_new, err = _rk_step(rhs, t, y, f, h)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = _rms(err / scale)

        if err_norm <= 1.0:
            t_new = t + h if h < t_end - t else t_end
            if np.linalg.norm(y_new) > norm_limit:
                raise BlowUpError(
                    f"state norm exceeded {norm_limit:.1e} at t={t_new:.6g}",
                    t_new,
                    y_new,
                )
            yield t, y, f, t_new, y_new, f_new, err_norm
            steps += 1
            if err_norm == 0.0:
                factor = FAC_MAX
            else:
                factor = SAFETY * err_norm ** (-PI_ALPHA) * err_prev**PI_BETA
                factor = min(FAC_MAX, max(FAC_MIN, factor))
            err_prev = max(err_norm, 1e-4)
            t, y, f = t_new, y_new, f_new
            h *= factor
        else:
            factor = max(FAC_MIN, SAFETY * err_norm ** (-1 / 5))
            logger.debug("step rejected at t=%.6g, err=%.3g", t, err_norm)
            h *= factor


def integrate(
    rhs: Rhs,
    state0,
    t_end: float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    t0: float = 0.0,
    max_steps: int = MAX_STEPS,
    norm_limit: float = NORM_LIMIT,
) -> Trajectory:
    """Integrate rhs(t, y) from t0 to t_end with Dormand-Prince 5(4) and PI control."""
    y0 = np.array(state0, dtype=float)
    if t_end < t0:
        raise PreconditionError(f"t_end={t_end} precedes t0={t0}")
    if t_end == t0:
        f0 = _evaluate(rhs, t0, y0)
        return Trajectory(np.array([t0]), y0[None, :], f0[None, :], np.zeros(0))

    times, states, derivs, errors = [], [], [], []
    for t, y, f, t_new, y_new, f_new, err in _steps(
        rhs, t0, y0, t_end, rtol, atol, max_steps, norm_limit
    ):
        if not times:
            times.append(t)
            states.append(y)
            derivs.append(f)
        times.append(t_new)
        states.append(y_new)
        derivs.append(f_new)
        errors.append(err)

    return Trajectory(
        np.array(times), np.array(states), np.array(derivs), np.array(errors)
    )


def _locate_crossing(rhs, section, t, y, f, t_new, y_new, f_new):
    """Crossing time inside an accepted step, refined on the Hermite interpolant
    and then polished against single Runge-Kutta steps from the step start."""
    idx = section.index

    def gap(s):
        return _hermite(t, y, f, t_new, y_new, f_new, s)[idx] - section.level

    g_new = y_new[idx] - section.level
    if g_new == 0.0:
        t_star = t_new
    else:
        t_star = brentq(gap, t, t_new, xtol=1e-13, rtol=4 * np.finfo(float).eps)

    for _ in range(4):
        h = t_star - t
        if h <= 0:
            break
        y_star, f_star, _ = _rk_step(rhs, t, y, f, h)
        slope = f_star[idx]
        if slope == 0.0:
            break
        dt = -(y_star[idx] - section.level) / slope
        t_next = min(max(t_star + dt, t + 1e-3 * (t_new - t)), t_new)
        if abs(t_next - t_star) <= 1e-14 * max(1.0, abs(t_star)):
            t_star = t_next
            break
        t_star = t_next

    h = t_star - t
    if h > 0:
        y_star, f_star, _ = _rk_step(rhs, t, y, f, h)
    else:
        y_star, f_star = y.copy(), f.copy()
    y_star = np.array(y_star, dtype=float)
    y_star[idx] = section.level
    return t_star, y_star, f_star


def _return_orbit(
    rhs: Rhs,
    section: Section,
    state,
    t_max: float,
    rtol: float,
    atol: float,
) -> Tuple[np.ndarray, float, Trajectory]:
    y0 = np.array(state, dtype=float)
    if abs(section.gap(y0)) > 1e-9 * max(1.0, abs(section.level)):
        raise PreconditionError(
            f"state {y0} is not on the section x[{section.index}] = {section.level}"
        )

    times, states, derivs, errors = [], [], [], []
    for t, y, f, t_new, y_new, f_new, err in _steps(rhs, 0.0, y0, t_max, rtol, atol):
        if not times:
            times.append(t)
            states.append(y)
            derivs.append(f)
        g_old = section.gap(y)
        g_new = section.gap(y_new)
        crossed = g_old != 0.0 and (g_old * g_new < 0 or g_new == 0.0)
        if crossed:
            t_star, y_star, f_star = _locate_crossing(
                rhs, section, t, y, f, t_new, y_new, f_new
            )
            if section.offset(y_star) > 0:
                if t_star > times[-1]:
                    times.append(t_star)
                    states.append(y_star)
                    derivs.append(f_star)
                    errors.append(err)
                traj = Trajectory(
                    np.array(times), np.array(states), np.array(derivs), np.array(errors)
                )
                return y_star, t_star, traj
        times.append(t_new)
        states.append(y_new)
        derivs.append(f_new)
        errors.append(err)

    raise NoReturnError(
        f"no return to section x[{section.index}] = {section.level:.6g} "
        f"within t_max={t_max:.6g}"
    )


def poincare_return(
    rhs: Rhs,
    section: Section,
    state,
    t_max: float,
    rtol: float = 1e-11,
    atol: float = 1e-13,
) -> Tuple[np.ndarray, float]:
    """Next crossing of ``section`` on its accepted side, and the time it took."""
    y_star, t_star, _ = _return_orbit(rhs, section, state, t_max, rtol, atol)
    return y_star, t_star


def find_cycle(
    rhs: Rhs,
    lam: float,
    section: Section,
    guess: float,
    tol: float = 1e-8,
    t_max: float = 100.0,
    max_iter: int = 40,
    rtol: float = 1e-11,
    atol: float = 1e-13,
    center: Optional[np.ndarray] = None,
) -> Cycle:
    """Secant iteration on the return-map displacement d(s) = offset(P(s)) - s.

    Converged when |d(s)| <= tol * max(1, s). The amplitude is the largest
    distance of the periodic orbit from ``center`` (default: the section point
    at offset zero).
    """
    if not guess > 0:
        raise PreconditionError(f"section offset guess must be positive, got {guess}")
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    min_offset = 1e-9

    def displacement(s: float):
        end, period, traj = _return_orbit(rhs, section, section.point(s), t_max, rtol, atol)
        return section.offset(end) - s, period, traj

    def done(s, d):
        return abs(d) <= tol * max(1.0, s)

    s0 = float(guess)
    d0, period0, traj0 = displacement(s0)
    s_best, period, traj = s0, period0, traj0
    iterations = 0
    if not done(s0, d0):
        s1 = s0 * (1.0 + 1e-3)
        d1, period1, traj1 = displacement(s1)
        converged = done(s1, d1)
        s_best, period, traj = s1, period1, traj1
        while not converged:
            iterations += 1
            if iterations > max_iter:
                raise CycleNotFoundError(
                    f"secant iteration did not converge in {max_iter} steps "
                    f"(last offset {s1:.6g}, displacement {d1:.3e})",
                    last_iterate=s1,
                )
            if d1 == d0:
                raise CycleNotFoundError(
                    "flat return-map displacement; secant step undefined",
                    last_iterate=s1,
                )
            # at most a factor 2 per secant step, so no iterate lands far outside the orbit
            s2 = min(max(s1 - d1 * (s1 - s0) / (d1 - d0), 0.5 * s1), 2.0 * s1)
            if s2 < min_offset:
                raise CycleNotFoundError(
                    "secant iterates collapsed onto the section origin",
                    last_iterate=s2,
                )
            logger.debug("secant: s=%.15g d=%.3e", s2, d1)
            s0, d0 = s1, d1
            s1 = s2
            d1, period, traj = displacement(s1)
            s_best = s1
            converged = done(s1, d1)

    delta = 1e-4 * max(s_best, 1e-3)
    d_probe, _, _ = displacement(s_best + delta)
    d_here = section.offset(traj.final_state) - s_best
    multiplier = 1.0 + (d_probe - d_here) / delta

    centre = section.point(0.0) if center is None else np.asarray(center, dtype=float)
    dense = traj.dense(per_step=4)
    amplitude = float(np.max(np.linalg.norm(dense - centre, axis=1)))
    return Cycle(
        lam=float(lam),
        period=float(period),
        anchor=section.point(s_best),
        amplitude=amplitude,
        samples=traj,
        offset=s_best,
        multiplier=float(multiplier),
        iterations=iterations,
    )
