# fsforge/src/main.py
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from core.config import settings
from cli.models import COMMANDS, RunConfig, parse_grid, parse_pair
from cli.routes import execute

logger = logging.getLogger(__name__)

DESCRIPTIONS = {
    "crit": "critical points, values and Hessians",
    "order": "phase geometry and clockwise order for a ray",
    "flows": "separatrix connections between ordered pairs (JSON + SVG)",
    "grade": "nondegeneracy and absolute gradings",
    "floer": "Floer strip solve and its diagnostics",
    "category": "assemble the directed category and verify relations",
    "wallcross": "deform along a family and recount connections",
}


def _grid(text: str):
    try:
        return parse_grid(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _pair(text: str):
    try:
        return parse_pair(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsforge", description="Morse-theoretic Fukaya-Seidel toolkit for polynomial superpotentials"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=DESCRIPTIONS[name])
        p.add_argument("problem", type=Path, help="problem file (JSON or TOML); family file for wallcross")
        p.add_argument("-o", "--output", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--alpha", type=float, default=None, help="ray angle (overrides the problem file)")
        p.add_argument("--tol-root", type=float, default=None)
        p.add_argument("--tol-conserve", type=float, default=None)
        p.add_argument("--grid", type=_grid, default=None, help="Floer grid NSxNT")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--pair", type=_pair, default=None, help="source,target for floer")
        p.add_argument("--m1", type=Path, default=None, help="supplied m1 counts")
        p.add_argument("--m2", type=Path, default=None, help="supplied m2 tensors")
        p.add_argument("--log-file", type=Path, default=None)
    return parser


def configure_logging(level: str, log_file: Optional[Path]) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file is not None:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    log_file = args.log_file or (Path(settings.LOG_FILE) if settings.LOG_FILE else None)
    configure_logging(settings.LOG, log_file)

    try:
        config = RunConfig(
            command=args.command,
            problem=args.problem,
            output=args.output,
            alpha=args.alpha,
            overrides={"TOL_ROOT": args.tol_root, "TOL_CONSERVE": args.tol_conserve},
            seed=args.seed,
            jobs=args.jobs,
            grid=args.grid,
            pair=args.pair,
            m1_file=args.m1,
            m2_file=args.m2,
            log_file=log_file,
        )
        run_settings = settings.with_overrides(
            **config.overrides,
            SEED=config.seed,
            JOBS=config.jobs,
            FLOER_NS=config.grid[0] if config.grid else None,
            FLOER_NT=config.grid[1] if config.grid else None,
        )
    except ValidationError as e:
        logger.error(f"❌ invalid invocation: {e}")
        return 1

    logger.info(f"🚀 fsforge {args.command} on {config.problem}")
    code = execute(config, run_settings)
    if code == 0:
        logger.info("👋 done")
    return code


if __name__ == "__main__":
    sys.exit(main())
