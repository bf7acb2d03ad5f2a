"""Command-line entry point.

Usage:  cvlattice <experiment> [--config FILE] [key=value ...]

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(non-finite amplitudes; the offending step index is reported).

The threads key is honored by exporting the BLAS/OpenMP thread-count
environment variables before any numerical module is imported, which is
why the heavy imports happen inside main().
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from cvlattice.config import EXPERIMENTS, ConfigError, load_config

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _apply_threads(threads: int) -> None:
    if threads <= 0:
        return
    if "numpy" in sys.modules:
        print("warning: numpy already loaded; threads setting may not apply", file=sys.stderr)
    for var in _THREAD_VARS:
        os.environ[var] = str(threads)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvlattice",
        description="Split-step evolution experiments on a lattice of continuous-variable modes",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS, help="experiment driver to run")
    parser.add_argument("--config", metavar="PATH", help="TOML configuration file")
    parser.add_argument(
        "overrides",
        nargs="*",
        metavar="key=value",
        help="configuration overrides applied after the file",
    )
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.experiment, args.config, args.overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    _apply_threads(config.threads)

    from cvlattice.lattice import NumericalFailure
    from cvlattice.runner import run_experiment

    try:
        metrics = run_experiment(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for name, value in metrics.items():
        print(f"{name} = {value:.17g}")
    print(f"outputs written to {config.outdir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
