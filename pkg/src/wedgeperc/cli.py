"""Command line entry point: ``wedgeperc <command> --config PATH [--out DIR] ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bridging import BridgeError, EnergyComparisonError
from .chemical import InsufficientDataError
from .experiments import COMMANDS, ConfigError, load_config, run
from .flows import DecompositionError, GaugeValidationError
from .lattice import RangeError
from .resistance import SolverError, UnreachableError

# exit status per error class
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SOLVER = 4
EXIT_CHECK = 5

_ERRORS = (
    (ConfigError, EXIT_USAGE),
    (RangeError, EXIT_USAGE),
    (InsufficientDataError, EXIT_DATA),
    (UnreachableError, EXIT_SOLVER),
    (SolverError, EXIT_SOLVER),
    (DecompositionError, EXIT_CHECK),
    (EnergyComparisonError, EXIT_CHECK),
    (BridgeError, EXIT_CHECK),
    (GaugeValidationError, EXIT_CHECK),
)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wedgeperc", description="Percolation-on-wedges experiments.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path, help="TOML experiment config")
    ap.add_argument("--seed-offset", type=int, default=0, help="added to every seed")
    ap.add_argument("--threads", type=int, default=1, help="replicas run in parallel")
    ap.add_argument("--out", type=Path, default=None, help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.command)
        out = args.out or Path(cfg.out or f"runs/{args.command}")
        code, man = run(cfg, out, threads=args.threads, seed_offset=args.seed_offset)
    except Exception as exc:
        for cls, code in _ERRORS:
            if isinstance(exc, cls):
                print(f"wedgeperc: {type(exc).__name__}: {exc}", file=sys.stderr)
                return code
        raise
    print(f"{args.command}: wrote {len(man.artifacts)} artifacts to {out} in {man.wall_time_s:.2f}s")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
