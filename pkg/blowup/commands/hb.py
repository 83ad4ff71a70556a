import logging
import math
from pathlib import Path
from typing import Any, Dict, Tuple

from ..exceptions import BranchSweepError, PreconditionError
from ..hbcore import (
    J_matrix,
    Nonlinearity,
    SymbolPolynomial,
    check_lipschitz,
    check_theorem_conditions,
    default_r_grid,
    find_root,
    fixed_point_Ar,
    sweep_branch,
    validate_solution,
)
from ..loaders import build_nonlinearity, build_symbol, load_symbol_file
from ..schemas import NonlinearityRecord, RunConfig, SearchBox, SymbolRecord
from ..utils import emit_svg, write_csv

logger = logging.getLogger(__name__)

BRANCH_COLUMNS = [
    "r",
    "lambda",
    "w",
    "sup_norm_x",
    "residual",
    "contraction_estimate",
    "iterations",
]
# Fourier coefficients stay out of summary.json
POINT_EXCLUDE = {"triple"}


def _load(config: RunConfig) -> Tuple[SymbolRecord, SymbolPolynomial, Nonlinearity, SearchBox]:
    if config.symbol_file is None:
        raise PreconditionError(f"{config.subcommand} needs --symbol")
    record, nl_record, box = load_symbol_file(config.symbol_file)
    if config.nonlinearity is not None:
        nl_record = NonlinearityRecord(
            kind=config.nonlinearity,
            epsilon=config.epsilon if config.epsilon is not None else 0.0,
        )
    elif config.epsilon is not None and nl_record is not None:
        nl_record = nl_record.model_copy(update={"epsilon": config.epsilon})
    poly = build_symbol(record, label=config.symbol_file.stem)
    return record, poly, build_nonlinearity(nl_record), config.box or box


def _seed(config: RunConfig, record: SymbolRecord) -> Tuple[float, float]:
    w = config.seed_w if config.seed_w is not None else record.root_w
    lam = config.seed_lambda if config.seed_lambda is not None else record.root_lambda
    if w is None or lam is None:
        raise PreconditionError("no Newton seed: pass --seed w,lambda or add a [root] section")
    return w, lam


def _branch_rows(points):
    return (
        (p.r, p.lam, p.w, p.sup_norm_x, p.residual, p.contraction_estimate, p.iterations)
        for p in points
    )


def hb_root(config: RunConfig, out: Path) -> Dict[str, Any]:
    record, poly, _, _ = _load(config)
    w0, lam0 = find_root(poly, *_seed(config, record))
    jac, det = J_matrix(poly, w0, lam0)
    logger.info("root of L(wi; lambda): w0=%.15g lambda0=%.15g", w0, lam0)
    return {"w0": w0, "lambda0": lam0, "J": jac.tolist(), "det_J": det}


def hb_check(config: RunConfig, out: Path) -> Dict[str, Any]:
    _, poly, nl, box = _load(config)
    if box is None:
        raise PreconditionError("hb-check needs --box or a [box] section")
    report = check_theorem_conditions(
        poly,
        config.q,
        box,
        config.n_harmonics,
        config.grid_density,
        config.max_expansions,
    )
    return {
        "theorem": report.model_dump(mode="json"),
        "nonlinearity": check_lipschitz(nl).model_dump(mode="json"),
    }


def hb_branch(config: RunConfig, out: Path) -> Dict[str, Any]:
    record, poly, nl, _ = _load(config)
    root = find_root(poly, *_seed(config, record))
    grid = default_r_grid(config.r_points, config.r_min, config.r_max)
    try:
        branch = sweep_branch(
            poly,
            nl,
            grid,
            config.m_grid,
            config.fixed_point_tol,
            config.max_iter,
            root,
            config.q,
            config.n_harmonics,
        )
    except BranchSweepError as exc:
        write_csv(
            out / "hb_branch.csv",
            BRANCH_COLUMNS,
            _branch_rows(exc.partial),
            comment=f"sweep failed at r={exc.r:.16g}",
        )
        raise

    write_csv(out / "hb_branch.csv", BRANCH_COLUMNS, _branch_rows(branch.points))
    if config.emit_svg:
        emit_svg(
            [(p.r, p.sup_norm_x) for p in branch.points],
            "r",
            "sup |x_r|",
            out / "hb_branch.svg",
            log_x=True,
            log_y=True,
            title=poly.label,
        )
    summary = branch.model_dump(mode="json", exclude={"points": {"__all__": POINT_EXCLUDE}})
    first, last = branch.points[0].sup_norm_x, branch.points[-1].sup_norm_x
    summary["decades_spanned"] = math.log10(last / first) if first > 0 else None
    return summary


def hb_validate(config: RunConfig, out: Path) -> Dict[str, Any]:
    record, poly, nl, _ = _load(config)
    root = find_root(poly, *_seed(config, record))
    point = fixed_point_Ar(
        poly,
        nl,
        config.r,
        None,
        config.m_grid,
        config.fixed_point_tol,
        config.max_iter,
        root,
        config.q,
        config.n_harmonics,
    )
    report = validate_solution(poly, nl, point, config.m_check)
    return {
        "point": point.model_dump(mode="json", exclude=POINT_EXCLUDE),
        "validation": report.model_dump(mode="json"),
    }
