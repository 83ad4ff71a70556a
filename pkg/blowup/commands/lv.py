import logging
import math
from pathlib import Path
from typing import Any, Dict

import numpy as np

from ..branch import amplitude_profile, continue_planar
from ..exceptions import PreconditionError
from ..loaders import build_system, select_system
from ..lvmodel import (
    LVSystem,
    check_proposition_conditions,
    default_probe_grid,
    equilibrium,
    hopf_locate,
    log_vector_field,
    lyapunov_function,
)
from ..odecore import integrate
from ..schemas import RunConfig
from ..utils import emit_svg, write_csv

logger = logging.getLogger(__name__)


def _system(config: RunConfig) -> LVSystem:
    if config.system_file is None:
        raise PreconditionError(f"{config.subcommand} needs --system")
    return build_system(select_system(config.system_file, config.system_name))


def lv_hopf(config: RunConfig, out: Path) -> Dict[str, Any]:
    """Hopf point of the catalog system and the equilibrium there."""
    sys = _system(config)
    lam_h = hopf_locate(sys, config.lambda_lo, config.lambda_hi, config.hopf_tol)
    eq = equilibrium(sys, lam_h)
    logger.info("%s: lambda_H = %.15g", sys.name, lam_h)
    return {
        "system": sys.name,
        "lambda_H": lam_h,
        "derivative_at_lambda_H": eq.derivative,
        "equilibrium": eq.model_dump(mode="json"),
    }


def lv_check(config: RunConfig, out: Path) -> Dict[str, Any]:
    sys = _system(config)
    report = check_proposition_conditions(sys, default_probe_grid(sys, config.grid_points))
    record = report.model_dump(mode="json")
    rows = [
        (key, "" if value is None else value)
        for key, value in record.items()
        if key != "first_violation"
    ]
    if report.first_violation is not None:
        rows.append(("first_violation", report.first_violation.condition))
        rows.append(("first_violation_y", report.first_violation.y))
    write_csv(out / "conditions.csv", ["key", "value"], rows)
    return record


def lv_simulate(config: RunConfig, out: Path) -> Dict[str, Any]:
    """Integrate in log coordinates and write the trajectory in both coordinate systems."""
    sys = _system(config)
    if config.lam is None:
        raise PreconditionError("lv-simulate needs --lambda")
    eq = equilibrium(sys, config.lam)
    x0 = config.x0 if config.x0 is not None else 1.1 * eq.x_star
    y0 = config.y0 if config.y0 is not None else eq.y_star
    if x0 <= 0 or y0 <= 0:
        raise PreconditionError("initial populations must be positive")

    rhs = log_vector_field(sys, config.lam)
    traj = integrate(
        rhs, [math.log(x0), math.log(y0)], config.t_end, rtol=config.rtol, atol=config.atol
    )
    u, v = traj.states[:, 0], traj.states[:, 1]
    x, y = np.exp(u), np.exp(v)
    write_csv(
        out / "trajectory.csv",
        ["time", "x", "y", "u", "v"],
        (
            (float(t), float(a), float(b), float(c), float(d))
            for t, a, b, c, d in zip(traj.times, x, y, u, v)
        ),
    )
    if config.emit_svg:
        emit_svg(list(zip(u, v)), "u = ln x", "v = ln y", out / "trajectory.svg", title=sys.name)
    return {
        "system": sys.name,
        "lambda": config.lam,
        "steps": len(traj) - 1,
        "final_time": float(traj.times[-1]),
        "final_x": float(x[-1]),
        "final_y": float(y[-1]),
        "V_start": lyapunov_function(sys, config.lam, x0, y0),
        "V_end": lyapunov_function(sys, config.lam, float(x[-1]), float(y[-1])),
    }


def lv_branch(config: RunConfig, out: Path) -> Dict[str, Any]:
    if config.system_file is None:
        raise PreconditionError("lv-branch needs --system")
    record = select_system(config.system_file, config.system_name)
    sys = build_system(record)
    lam_from = config.lambda_from if config.lambda_from is not None else record.branch_from
    lam_to = config.lambda_to if config.lambda_to is not None else record.branch_to
    if lam_from is None or lam_to is None:
        raise PreconditionError("lv-branch needs --from and --to (or branch_from/branch_to)")

    branch = continue_planar(sys, lam_from, lam_to, config.step0, config.cap, config.cycle_tol)
    verdict = f"verdict: {branch.verdict.value}"
    if branch.verdict_lambda is not None:
        verdict += f" at lambda={branch.verdict_lambda:.16g}"
    if branch.reason:
        verdict += f" ({branch.reason})"
    write_csv(
        out / "branch.csv",
        ["lambda", "amplitude", "period", "anchor_u", "anchor_v"],
        ((p.lam, p.amplitude, p.period, p.anchor_u, p.anchor_v) for p in branch.points),
        comment=verdict,
    )
    if config.emit_svg:
        emit_svg(
            amplitude_profile(branch),
            "lambda",
            "cycle amplitude",
            out / "branch.svg",
            log_y=True,
            title=sys.name,
        )
    return branch.model_dump(mode="json")
