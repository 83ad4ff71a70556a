import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from . import __version__
from .commands import HANDLERS
from .config import configure_logging, get_settings
from .exceptions import CycleToolkitError
from .schemas import RunConfig, SearchBox
from .utils import round_floats, write_json

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


def _pair(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers separated by commas, got {text!r}")
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected w,lambda, got {text!r}")
    return values


def _box(text: str) -> SearchBox:
    try:
        w_lo, w_hi, lam_lo, lam_hi = (float(v) for v in text.split(","))
        return SearchBox(w_lo=w_lo, w_hi=w_hi, lam_lo=lam_lo, lam_hi=lam_hi)
    except (ValueError, ValidationError):
        raise argparse.ArgumentTypeError(f"expected w_lo,w_hi,lambda_lo,lambda_hi, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", type=Path, help="output directory (default: $BLOWUP_OUTPUT_DIR)")
    common.add_argument("--svg", action="store_true", help="also draw the branch or trajectory")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    lv = argparse.ArgumentParser(add_help=False, parents=[common])
    lv.add_argument("--system", type=Path, required=True, help="system catalog file")
    lv.add_argument("--name", help="catalog section when the file holds several systems")

    hb = argparse.ArgumentParser(add_help=False, parents=[common])
    hb.add_argument("--symbol", type=Path, required=True, help="symbol file")
    hb.add_argument("--seed", type=_pair, help="Newton seed w,lambda")
    hb.add_argument("-N", "--harmonics", type=int, help="harmonic truncation N")
    hb.add_argument("-M", "--grid", type=int, help="collocation points (default 4N)")
    hb.add_argument("--q", type=float, help="ball radius / sublevel value")
    hb.add_argument("--nonlinearity", choices=["zero", "linear", "saturating_cubic", "damped_sine"])
    hb.add_argument("--epsilon", type=float)

    parser = argparse.ArgumentParser(
        prog="blowup",
        description="Hopf bifurcations and cycles that blow up: Lotka-Volterra and harmonic balance",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("lv-hopf", parents=[lv], help="locate lambda_H")
    p.add_argument("--lambda-lo", type=float)
    p.add_argument("--lambda-hi", type=float)
    p.add_argument("--tol", type=float, dest="hopf_tol")

    p = sub.add_parser("lv-check", parents=[lv], help="check the sign conditions at lambda = 0, 1")
    p.add_argument("--grid-points", type=int)

    p = sub.add_parser("lv-simulate", parents=[lv], help="integrate one trajectory")
    p.add_argument("--lambda", type=float, dest="lam", required=True)
    p.add_argument("--x0", type=float)
    p.add_argument("--y0", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)

    p = sub.add_parser("lv-branch", parents=[lv], help="continue the cycle branch in lambda")
    p.add_argument("--from", type=float, dest="lambda_from")
    p.add_argument("--to", type=float, dest="lambda_to")
    p.add_argument("--step", type=float, dest="step0")
    p.add_argument("--cap", type=float)
    p.add_argument("--tol", type=float, dest="cycle_tol")

    sub.add_parser("hb-root", parents=[hb], help="solve L(wi; lambda) = 0")

    p = sub.add_parser("hb-check", parents=[hb], help="grid checks of the domain D_q")
    p.add_argument("--box", type=_box)
    p.add_argument("--grid-density", type=int)
    p.add_argument("--max-expansions", type=int)

    p = sub.add_parser("hb-branch", parents=[hb], help="sweep r and solve the fixed points")
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--r-points", type=int)
    p.add_argument("--tol", type=float, dest="fixed_point_tol")
    p.add_argument("--max-iter", type=int)

    p = sub.add_parser("hb-validate", parents=[hb], help="solve at one r and cross-check")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--m-check", type=int)
    p.add_argument("--tol", type=float, dest="fixed_point_tol")
    p.add_argument("--max-iter", type=int)
    return parser


# argparse destination -> RunConfig field, for options whose names differ
_RENAMES = {
    "system": "system_file",
    "name": "system_name",
    "symbol": "symbol_file",
    "svg": "emit_svg",
    "harmonics": "n_harmonics",
    "grid": "m_grid",
}
_IGNORED = {"output", "log_level", "seed"}


def to_config(args: argparse.Namespace, output_dir: Path) -> RunConfig:
    """Turn parsed arguments into a RunConfig; unset options keep the model defaults."""
    values = {"subcommand": args.subcommand, "output_dir": args.output or output_dir}
    for key, value in vars(args).items():
        if key in _IGNORED or key == "subcommand" or value is None:
            continue
        values[_RENAMES.get(key, key)] = value
    if getattr(args, "seed", None) is not None:
        values["seed_w"], values["seed_lambda"] = args.seed
    if "n_harmonics" in values:
        values.setdefault("m_grid", 4 * values["n_harmonics"])
        values.setdefault("m_check", max(512, 4 * values["n_harmonics"]))
    return RunConfig(**values)


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    settings = get_settings()
    configure_logging(settings, args.log_level)
    try:
        config = to_config(args, settings.output_dir)
    except ValidationError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    handler = HANDLERS[config.subcommand]
    logger.info("%s started, writing to %s", config.subcommand, out)

    started = time.perf_counter()
    try:
        result, error, code = handler(config, out), None, EXIT_OK
        status = "ok"
    except CycleToolkitError as exc:
        logger.error("%s failed: %s", config.subcommand, exc)
        result, status, code = None, "error", EXIT_DOMAIN
        error = {"type": type(exc).__name__, "message": str(exc)}
    elapsed = time.perf_counter() - started

    write_json(
        out / "summary.json",
        {
            "config": config.model_dump(mode="json"),
            "status": status,
            "result": round_floats(result),
            "error": error,
        },
    )
    write_json(out / "timings.json", {"subcommand": config.subcommand, "seconds": elapsed})
    logger.info("%s finished with status %s in %.2f s", config.subcommand, status, elapsed)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
