"""``phi4`` command: run a named experiment from a config file.

Usage::

    phi4 <experiment-name> --config <path> [--seed N] [--out DIR] [--replicas N]

Exit codes: 0 all rows pass, 1 any row fails, 2 configuration error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .config import (
    EXPERIMENT_NAMES,
    ConfigError,
    config_with_overrides,
    load_config,
)
from .experiments import run_experiment
from .potential import NumericFailure

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phi4",
        description="Double-well diffusion experiments: spectra, transition "
        "statistics, and sampler cross-checks with CSV/JSON reports.",
    )
    parser.add_argument(
        "experiment",
        metavar="experiment-name",
        help="one of: " + ", ".join(EXPERIMENT_NAMES),
    )
    parser.add_argument("--config", required=True, help="path to the config file")
    parser.add_argument("--seed", type=int, default=None, help="override master seed")
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument(
        "--replicas", type=int, default=None, help="override replica count"
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = config_with_overrides(
            cfg, seed=args.seed, out_dir=args.out, replicas=args.replicas
        )
        rows, status = run_experiment(cfg, args.experiment)
    except ConfigError as exc:
        print(f"phi4: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"phi4: numeric failure: {exc}", file=sys.stderr)
        return 3

    for row in rows:
        flag = "pass" if row.passed else "FAIL"
        print(
            f"[{flag}] {row.experiment} beta={row.beta:g} {row.quantity}: "
            f"measured={row.measured:.6g} predicted={row.predicted:.6g} "
            f"({row.rule}, tol={row.tolerance:g})"
        )
    n_pass = sum(row.passed for row in rows)
    print(f"{args.experiment}: {n_pass}/{len(rows)} rows pass -> {cfg.out_dir}/")
    return status


if __name__ == "__main__":
    sys.exit(main())
