"""Continuation in lambda of the cycle branch born at the Hopf point."""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (
    BlowUpError,
    CycleNotFoundError,
    IntegrationError,
    NoReturnError,
    NotBracketedError,
    PreconditionError,
    SeedError,
)
from .lvmodel import LVSystem, equilibrium, hopf_locate, log_vector_field
from .odecore import Cycle, Section, find_cycle, poincare_return
from .schemas import (
    BranchPoint,
    BranchVerdict,
    HopfScalingFit,
    LadderRung,
    PlanarBranch,
)

logger = logging.getLogger(__name__)

AMPLITUDE_CAP = 50.0
MIN_STEP = 1e-6
STEP_GROWTH = 1.5
RATIO_BOUND = 1.5
SEED_OFFSET = 1e-3
HOPF_FIT_POINTS = 5
HOPF_FIT_MIN_R2 = 0.95
MAX_POINTS = 5000
MAX_BACKFILL = 40


def _tolerances(tol: float) -> Tuple[float, float]:
    rtol = min(1e-10, 0.01 * tol)
    return rtol, 1e-2 * rtol


def _t_max(period: Optional[float]) -> float:
    return max(50.0, 10.0 * period) if period else 50.0


def lv_section(sys: LVSystem, lam: float) -> Tuple[Section, np.ndarray]:
    """Section v = ln y* crossed at u > ln x*, and the equilibrium in log coordinates."""
    eq = equilibrium(sys, lam)
    centre = np.array([math.log(eq.x_star), math.log(eq.y_star)])
    return Section(index=1, level=centre[1], side=1, origin=centre[0]), centre


def ladder_thresholds(cap: float) -> List[float]:
    return [t for t in (0.1, 1.0, 10.0) if t < cap] + [cap]


def nested_domain_ladder(amplitudes: Sequence[float], cap: float) -> List[LadderRung]:
    """For each threshold A, the first recorded amplitude inside [A, 2A] if any."""
    amps = np.asarray(amplitudes, dtype=float)
    rungs = []
    for threshold in ladder_thresholds(cap):
        hits = amps[(amps >= threshold) & (amps <= 2.0 * threshold)]
        rungs.append(
            LadderRung(
                threshold=threshold,
                met=bool(hits.size),
                amplitude=float(hits[0]) if hits.size else None,
            )
        )
    return rungs


def hopf_scaling_fit(
    points: Sequence[BranchPoint], hopf_lambda: float, count: int = HOPF_FIT_POINTS
) -> Optional[HopfScalingFit]:
    """Least-squares fit amplitude ~ C sqrt|lambda - lambda_H| over the points nearest lambda_H."""
    if len(points) < 3:
        return None
    nearest = sorted(points, key=lambda p: abs(p.lam - hopf_lambda))[:count]
    root = np.sqrt(np.array([abs(p.lam - hopf_lambda) for p in nearest]))
    amps = np.array([p.amplitude for p in nearest])
    coeff, *_ = np.linalg.lstsq(root[:, None], amps, rcond=None)
    fitted = coeff[0] * root
    ss_tot = float(np.sum((amps - amps.mean()) ** 2))
    ss_res = float(np.sum((amps - fitted) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return HopfScalingFit(
        coefficient=float(coeff[0]), r_squared=r_squared, points=len(nearest)
    )


def amplitude_profile(branch: PlanarBranch) -> List[Tuple[float, float]]:
    if not branch.points:
        raise PreconditionError("branch has no points")
    return [(p.lam, p.amplitude) for p in branch.points]


def _to_point(cycle: Cycle) -> BranchPoint:
    return BranchPoint(
        lam=cycle.lam,
        amplitude=cycle.amplitude,
        period=cycle.period,
        anchor_u=float(cycle.anchor[0]),
        anchor_v=float(cycle.anchor[1]),
        multiplier=cycle.multiplier,
    )


def _cycle_at(
    sys: LVSystem, lam: float, offset_guess: float, tol: float, period: Optional[float]
) -> Cycle:
    rhs = log_vector_field(sys, lam)
    section, centre = lv_section(sys, lam)
    rtol, atol = _tolerances(tol)
    return find_cycle(
        rhs,
        lam,
        section,
        offset_guess,
        tol=tol,
        t_max=_t_max(period),
        rtol=rtol,
        atol=atol,
        center=centre,
    )


def seed_cycle(sys: LVSystem, lam: float, tol: float = 1e-8, cap: float = AMPLITUDE_CAP) -> Cycle:
    """First cycle of a branch: probe the equilibrium, bracket the return map, refine."""
    try:
        rhs = log_vector_field(sys, lam)
    except PreconditionError as exc:
        raise SeedError(str(exc)) from exc
    section, _ = lv_section(sys, lam)
    rtol, atol = _tolerances(tol)

    def displacement(s: float) -> float:
        end, _ = poincare_return(rhs, section, section.point(s), _t_max(None), rtol, atol)
        return section.offset(end) - s

    advice = "no cycle near the equilibrium; start at a lambda closer to lambda_H"
    try:
        d_prev = displacement(SEED_OFFSET)
    except (NoReturnError, IntegrationError) as exc:
        raise SeedError(f"{advice} ({exc})") from exc
    if d_prev <= 0:
        raise SeedError(f"equilibrium attracts at lambda={lam}: {advice}")

    s_prev = SEED_OFFSET
    s = 2.0 * s_prev
    while s <= cap:
        try:
            d = displacement(s)
        except (NoReturnError, IntegrationError) as exc:
            raise SeedError(f"lost the orbit while bracketing at offset {s:.3g}: {exc}") from exc
        if d < 0:
            guess = s_prev + (s - s_prev) * d_prev / (d_prev - d)
            logger.debug("seed bracket [%.6g, %.6g], guess %.6g", s_prev, s, guess)
            try:
                return _cycle_at(sys, lam, guess, tol, None)
            except (CycleNotFoundError, NoReturnError, IntegrationError) as exc:
                raise SeedError(f"cycle refinement failed at lambda={lam}: {exc}") from exc
        s_prev, d_prev = s, d
        s *= 2.0
    raise SeedError(f"return map pushes outward up to offset {cap} at lambda={lam}")


def _acceptable(new: Cycle, last: Cycle) -> bool:
    lo, hi = 1.0 / RATIO_BOUND, RATIO_BOUND
    amp_ratio = new.amplitude / last.amplitude if last.amplitude > 0 else 1.0
    period_ratio = new.period / last.period
    return lo <= amp_ratio <= hi and lo <= period_ratio <= hi


def _backfill(sys: LVSystem, seed: Cycle, hopf_lambda: float, floor: float, tol: float) -> List[Cycle]:
    """Cycles between lambda_start and lambda_H, halving the distance to lambda_H each time."""
    found: List[Cycle] = []
    last = seed
    for _ in range(MAX_BACKFILL):
        if last.amplitude < floor:
            break
        lam = hopf_lambda + 0.5 * (last.lam - hopf_lambda)
        guess = last.offset * math.sqrt(0.5)
        try:
            cycle = _cycle_at(sys, lam, guess, tol, last.period)
        except (CycleNotFoundError, NoReturnError, IntegrationError, PreconditionError) as exc:
            logger.debug("backfill stopped at lambda=%.6g: %s", lam, exc)
            break
        if not _acceptable(cycle, last):
            break
        found.append(cycle)
        last = cycle
    return found


def continue_planar(
    sys: LVSystem,
    lambda_start: float,
    lambda_stop: float,
    step0: float = 0.01,
    amplitude_cap: float = AMPLITUDE_CAP,
    tol: float = 1e-8,
    backfill: bool = True,
) -> PlanarBranch:
    """March lambda from lambda_start toward lambda_stop along the cycle branch.

    Each step is warm-started by linear extrapolation of the anchor and
    accepted only when amplitude and period change by at most a factor 1.5;
    otherwise the step is halved down to 1e-6. An orbit that escapes during a
    step counts as a failed step; only when the halving runs out does the
    escape end the march as BlewUp, with ``cap_reached`` telling whether the
    last cycle already touched the cap.
    """
    if step0 <= 0:
        raise PreconditionError("step0 must be positive")
    if lambda_start == lambda_stop:
        raise PreconditionError("lambda_start equals lambda_stop")
    direction = 1.0 if lambda_stop > lambda_start else -1.0

    try:
        hopf_lambda: Optional[float] = hopf_locate(sys)
    except NotBracketedError:
        hopf_lambda = None

    seed = seed_cycle(sys, lambda_start, tol, amplitude_cap)
    logger.info(
        "%s: seed cycle at lambda=%.6g, amplitude %.4g, period %.4g",
        sys.name,
        seed.lam,
        seed.amplitude,
        seed.period,
    )

    cycles: List[Cycle] = [seed]
    if backfill and hopf_lambda is not None and (hopf_lambda - lambda_start) * direction < 0:
        # points toward lambda_H come first so lambda stays monotone
        cycles = list(reversed(_backfill(sys, seed, hopf_lambda, 0.05, tol))) + cycles

    verdict = BranchVerdict.REACHED_LAMBDA_BOUND
    verdict_lambda: Optional[float] = lambda_stop
    reason = ""
    escape_norm: Optional[float] = None
    step = step0
    last = seed

    while True:
        if last.amplitude >= amplitude_cap:
            verdict, verdict_lambda = BranchVerdict.BLEW_UP, last.lam
            break
        remaining = (lambda_stop - last.lam) * direction
        if remaining <= 0:
            break
        if len(cycles) >= MAX_POINTS:
            verdict, verdict_lambda = BranchVerdict.STALLED, last.lam
            reason = f"point budget {MAX_POINTS} exhausted"
            break

        h = min(step, remaining)
        lam = lambda_stop if h == remaining else last.lam + direction * h
        if not _extinction_ok(sys, lam):
            verdict, verdict_lambda = BranchVerdict.STALLED, last.lam
            reason = f"extinction condition c > f(a/b; lambda) fails at lambda={lam:.6g}"
            break

        guess = last.offset
        if len(cycles) >= 2:
            prev = cycles[-2]
            slope = (last.anchor[0] - prev.anchor[0]) / (last.lam - prev.lam)
            section, _ = lv_section(sys, lam)
            extrapolated = last.anchor[0] + slope * (lam - last.lam) - section.origin
            if extrapolated > 0:
                guess = extrapolated

        try:
            cycle = _cycle_at(sys, lam, guess, tol, last.period)
            failure = None if _acceptable(cycle, last) else "amplitude or period jumped"
            escape = None
        except BlowUpError as exc:
            failure, escape = str(exc), exc
        except (CycleNotFoundError, NoReturnError, IntegrationError) as exc:
            failure, escape = str(exc), None

        if failure is not None:
            step *= 0.5
            logger.debug("step to lambda=%.8g failed (%s); step now %.3g", lam, failure, step)
            if step < MIN_STEP:
                if escape is not None:
                    # orbits next to the last cycle leave every bounded set
                    verdict, verdict_lambda = BranchVerdict.BLEW_UP, lam
                    escape_norm = float(np.linalg.norm(escape.state))
                    reason = f"orbit escaped below step {MIN_STEP:g}: {failure}"
                    logger.info("%s: orbit escaped at lambda=%.6g (%s)", sys.name, lam, failure)
                else:
                    verdict, verdict_lambda = BranchVerdict.STALLED, last.lam
                    reason = f"step fell below {MIN_STEP:g}: {failure}"
                break
            continue

        cycles.append(cycle)
        last = cycle
        step = min(step * STEP_GROWTH, step0)

    points = [_to_point(c) for c in cycles]
    fit = hopf_scaling_fit(points, hopf_lambda) if hopf_lambda is not None else None
    if fit is not None and fit.r_squared < HOPF_FIT_MIN_R2:
        logger.warning(
            "%s: amplitude ~ C sqrt|lambda - lambda_H| fits poorly (R^2 = %.3f)",
            sys.name,
            fit.r_squared,
        )
    side = None
    if hopf_lambda is not None:
        side = "below" if lambda_start < hopf_lambda else "above"

    logger.info(
        "%s: %s at lambda=%s after %d points",
        sys.name,
        verdict.value,
        "n/a" if verdict_lambda is None else f"{verdict_lambda:.6g}",
        len(points),
    )
    return PlanarBranch(
        system=sys.name,
        points=points,
        verdict=verdict,
        verdict_lambda=verdict_lambda,
        reason=reason,
        amplitude_cap=amplitude_cap,
        hopf_lambda=hopf_lambda,
        cycle_side=side,
        cycle_stability="stable" if seed.multiplier < 1.0 else "unstable",
        escape_norm=escape_norm,
        cap_reached=points[-1].amplitude >= amplitude_cap,
        ladder=nested_domain_ladder([p.amplitude for p in points], amplitude_cap),
        hopf_fit=fit,
    )


def _extinction_ok(sys: LVSystem, lam: float) -> bool:
    return sys.c > float(sys.term.value(sys.y_star, lam))
