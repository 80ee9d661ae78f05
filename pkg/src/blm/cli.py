"""Command-line front end: analyze, thermo, monitor, correlate.

Output is deterministic for identical inputs: floats carry 9 significant
digits, CSV always uses '.' as the decimal separator, JSON keys are emitted
in a fixed order.

Exit codes: 0 ok, 2 input/parse error, 3 empty or degenerate input,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import criteria
from .benford import digit_histogram, jsd_benford, mlh
from .earlystop import Decision, StopConfig, StopMonitor
from .errors import (
    EmptyInputError,
    IllConditionedError,
    IngestError,
    ManifestError,
    NpyFormatError,
    UndefinedCorrelationError,
)
from .gpr import gpr_correlation_rows
from .ingest import (
    ModelManifest,
    TensorSource,
    layerwise_report,
    load_manifest,
    model_mlh,
)
from .thermo import ThermoConfig, curve_to_csv, sweep

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EMPTY = 3
EXIT_NUMERIC = 4


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _round9(x: float) -> float:
    """Round to 9 significant digits so serialized output is stable."""
    return float(f"{float(x):.9g}")


def _fmt(x: float) -> str:
    return f"{float(x):.9g}"


def _manifest_for_file(path: str) -> ModelManifest:
    suffix = Path(path).suffix.lower()
    if suffix == ".npy":
        fmt = "npy"
    elif suffix in (".csv", ".txt"):
        fmt = "csv"
    else:
        raise CliError(
            f"cannot infer format of {path!r} (need .npy, .csv or .txt; "
            "use a manifest for raw tensors)",
            EXIT_INPUT,
        )
    name = Path(path).stem
    return ModelManifest(name, (TensorSource(name, path, fmt),), exclude_patterns=())


def cmd_analyze(args: argparse.Namespace) -> int:
    if args.manifest:
        try:
            manifest = load_manifest(Path(args.manifest).read_text())
        except OSError as exc:
            raise CliError(f"cannot read manifest: {exc}", EXIT_INPUT)
        except ManifestError as exc:
            raise CliError(f"manifest error: {exc}", EXIT_INPUT)
        base_dir = Path(args.manifest).parent
    else:
        manifest = _manifest_for_file(args.file)
        base_dir = None

    try:
        score, hist = model_mlh(manifest, base_dir)
        jsd = jsd_benford(hist)
        layers = layerwise_report(manifest, base_dir) if args.per_layer else None
    except EmptyInputError as exc:
        raise CliError(str(exc), EXIT_EMPTY)
    except (IngestError, NpyFormatError, ManifestError, OSError) as exc:
        raise CliError(str(exc), EXIT_INPUT)
    except UndefinedCorrelationError as exc:
        raise CliError(str(exc), EXIT_NUMERIC)

    overall: dict = {
        "n_values": hist.total,
        "excluded": hist.excluded,
        "bincount": [_round9(p) for p in hist.proportions()],
        "mlh": _round9(score.value),
        "jsd": _round9(jsd),
    }
    if args.train_acc is not None:
        A = args.train_acc
        overall["eic"] = _round9(criteria.eic(A, score.value))
        overall["eic_scaled"] = _round9(criteria.eic_scaled(A, score.value))
        if score.value > 0 and A > 0:
            overall["eic_sr"] = _round9(criteria.eic_sr(A, score.value))

    report: dict = {"model_name": manifest.model_name, "overall": overall}
    if layers is not None:
        report["layers"] = [
            {
                "name": layer.name,
                "n_values": layer.n_values,
                "mlh": _round9(layer.mlh),
                "jsd": _round9(layer.jsd),
            }
            for layer in layers
        ]

    if args.format == "json":
        sys.stdout.write(json.dumps(report, indent=2) + "\n")
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        digit_cols = [f"d{i}" for i in range(10)]
        writer.writerow(
            ["scope", "name", "n_values", "excluded", *digit_cols,
             "mlh", "jsd", "eic", "eic_scaled", "eic_sr"]
        )
        writer.writerow(
            ["overall", manifest.model_name, hist.total, hist.excluded,
             *(_fmt(p) for p in hist.proportions()),
             _fmt(score.value), _fmt(jsd),
             _fmt(overall["eic"]) if "eic" in overall else "",
             _fmt(overall["eic_scaled"]) if "eic_scaled" in overall else "",
             _fmt(overall["eic_sr"]) if "eic_sr" in overall else ""]
        )
        if layers is not None:
            for layer in layers:
                writer.writerow(
                    ["layer", layer.name, layer.n_values, layer.histogram.excluded,
                     *(_fmt(p) for p in layer.histogram.proportions()),
                     _fmt(layer.mlh), _fmt(layer.jsd), "", "", ""]
                )
    return EXIT_OK


def cmd_thermo(args: argparse.Namespace) -> int:
    try:
        config = ThermoConfig(
            beta_min=args.beta_min,
            beta_max=args.beta_max,
            steps=args.steps,
            samples_per_step=args.samples,
            seed=args.seed,
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT)
    try:
        curve = sweep(config)
    except (EmptyInputError, UndefinedCorrelationError) as exc:
        raise CliError(str(exc), EXIT_NUMERIC)
    if args.out == "-":
        curve_to_csv(curve, sys.stdout)
    else:
        with open(args.out, "w") as fh:
            curve_to_csv(curve, fh)
    return EXIT_OK


def cmd_monitor(args: argparse.Namespace) -> int:
    try:
        config = StopConfig(
            patience=args.patience, mode=args.mode, min_delta=args.min_delta
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT)
    monitor = StopMonitor(config)
    words = {
        Decision.IMPROVED: "IMPROVED",
        Decision.CONTINUE: "CONTINUE",
        Decision.STOP: "STOP",
    }
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            value = float(line)
        except ValueError:
            raise CliError(f"malformed value: {line!r}", EXIT_INPUT)
        try:
            decision = monitor.observe(value)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_INPUT)
        sys.stdout.write(words[decision] + "\n")
        sys.stdout.flush()
        if decision is Decision.STOP:
            break
    return EXIT_OK


def _read_runs_csv(path: str, y_column: str) -> list[criteria.RunRecord]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path!r}: {exc}", EXIT_INPUT)
    reader = csv.DictReader(io.StringIO(text))
    fields = reader.fieldnames or []
    required = {"step", "train_acc", "mlh", y_column}
    missing = required - set(fields)
    if missing:
        raise CliError(f"runs.csv is missing columns: {sorted(missing)}", EXIT_INPUT)
    records = []
    for i, row in enumerate(reader):
        y_raw = (row.get(y_column) or "").strip()
        if not y_raw:
            continue  # rows without the target are not usable for correlation
        try:
            records.append(
                criteria.RunRecord(
                    step=int(row["step"]),
                    train_accuracy=float(row["train_acc"]),
                    mlh=float(row["mlh"]),
                    val_accuracy=float(y_raw),
                )
            )
        except (TypeError, ValueError) as exc:
            raise CliError(f"runs.csv row {i + 2}: {exc}", EXIT_INPUT)
    return records


def cmd_correlate(args: argparse.Namespace) -> int:
    records = _read_runs_csv(args.input, args.y)
    if len(records) < 3:
        raise CliError("need at least 3 records with the target column", EXIT_EMPTY)
    try:
        rows = criteria.correlation_table(records)
        if args.gpr:
            if len(records) < 10:
                raise CliError("GPR rows need at least 10 records", EXIT_EMPTY)
            rows += gpr_correlation_rows(records)
    except UndefinedCorrelationError as exc:
        raise CliError(str(exc), EXIT_NUMERIC)
    except IllConditionedError as exc:
        raise CliError(str(exc), EXIT_NUMERIC)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT)

    if args.format == "json":
        payload = {
            "y": args.y,
            "n_records": len(records),
            "rows": [{"metric": name, "spearman": _round9(r)} for name, r in rows],
        }
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["metric", "spearman"])
        for name, r in rows:
            writer.writerow([name, _fmt(r)])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blm",
        description="Benford's-law conformity metrics for model weights",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="digit statistics and MLH/EIC of tensors")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--manifest", help="model manifest JSON")
    group.add_argument("--file", help="single .npy or .csv file")
    p.add_argument("--train-acc", type=float, default=None,
                   help="training accuracy A; enables the EIC fields")
    p.add_argument("--per-layer", action="store_true",
                   help="include one report per included tensor")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("thermo", help="MLH of Boltzmann energies over a beta sweep")
    p.add_argument("--beta-min", type=float, default=0.1)
    p.add_argument("--beta-max", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_thermo)

    p = sub.add_parser("monitor", help="early-stopping decisions for stdin values")
    p.add_argument("--patience", type=int, default=15)
    p.add_argument("--mode", choices=("max", "min"), default="max")
    p.add_argument("--min-delta", type=float, default=0.0)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("correlate", help="Spearman of criteria vs a target column")
    p.add_argument("--input", required=True, help="runs.csv path")
    p.add_argument("--y", default="val_acc", help="target column name")
    p.add_argument("--gpr", action="store_true",
                   help="append leave-one-out GPR rows (slower)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_correlate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"blm: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
