"""Harness CLI: run the validation-proportion sweep."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .experiment import ExperimentConfig, run_sweep


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="blm-harness",
        description="Desk-scale early-stopping sweep on the digits dataset",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run-sweep", help="train runs across validation proportions")
    p.add_argument("--proportions", default="0.1,0.2,0.3",
                   help="comma-separated validation proportions for val_acc stopping")
    p.add_argument("--n-runs", type=int, default=10)
    p.add_argument("--patience", type=int, default=15)
    p.add_argument("--warmup-evals", type=int, default=15,
                   help="evaluations ignored by the stopping monitor at the start")
    p.add_argument("--pool-size", type=int, default=400)
    p.add_argument("--max-epochs", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-mlh", action="store_true",
                   help="skip the MLH-stopping (proportion 0) setting")
    p.add_argument("--out", default="sweep_out", help="output directory")
    args = parser.parse_args(argv)

    common = dict(
        n_runs=args.n_runs, patience=args.patience, seed=args.seed,
        warmup_evals=args.warmup_evals,
        pool_size=args.pool_size, max_epochs=args.max_epochs,
    )
    configs = []
    if not args.no_mlh:
        configs.append(
            ExperimentConfig(val_proportion=0.0, stopping="mlh", **common)
        )
    for raw in args.proportions.split(","):
        raw = raw.strip()
        if raw:
            configs.append(
                ExperimentConfig(val_proportion=float(raw), stopping="val_acc",
                                 **common)
            )
    summary = run_sweep(configs, Path(args.out))
    json.dump(summary, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
