"""Training runs on the 8x8 digits dataset with MLH- or validation-based
early stopping.

Desk-scale stand-in for the full sweep: a small overfitting-prone CNN, a few
hundred training images, many short seeded runs. Only orderings are
meaningful at this scale, not absolute accuracies.
"""
from __future__ import annotations

import copy
import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
from sklearn.datasets import load_digits

from . import binding

EXCLUDED_PARAM_PATTERNS = ("bias", "bn", "norm")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "digits"
    val_proportion: float = 0.1
    n_runs: int = 10
    stopping: str = "val_acc"  # "mlh" or "val_acc"
    patience: int = 15
    eval_frequency: float = 0.33  # fraction of an epoch between evaluations
    warmup_evals: int = 15  # evaluations ignored by the monitor at the start
    seed: int = 0
    pool_size: int = 400
    test_size: int = 500
    max_epochs: int = 60
    batch_size: int = 64
    learning_rate: float = 3e-3

    def __post_init__(self) -> None:
        if not 0.0 <= self.val_proportion < 0.5:
            raise ValueError("val_proportion must be in [0, 0.5)")
        if self.stopping not in ("mlh", "val_acc"):
            raise ValueError("stopping must be 'mlh' or 'val_acc'")
        if self.stopping == "val_acc" and self.val_proportion == 0.0:
            raise ValueError("val_acc stopping needs a validation split")
        if self.n_runs < 1 or self.patience < 1:
            raise ValueError("n_runs and patience must be >= 1")
        if not 0.0 < self.eval_frequency <= 1.0:
            raise ValueError("eval_frequency must be in (0, 1]")
        if self.warmup_evals < 0:
            raise ValueError("warmup_evals must be >= 0")


class SmallCnn(nn.Module):
    """Two strided conv blocks + linear head; no dropout, overfits quickly."""

    def __init__(self) -> None:
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(1, 16, 3, stride=2, padding=1),
            nn.LeakyReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.LeakyReLU(),
        )
        self.classifier = nn.Linear(32 * 2 * 2, 10)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.features(x).flatten(1))


def weight_buffer(model: nn.Module) -> np.ndarray:
    """Flat float64 buffer of all non-constant-initialized parameters."""
    chunks = []
    for name, param in model.named_parameters():
        lname = name.lower()
        if any(pat in lname for pat in EXCLUDED_PARAM_PATTERNS):
            continue
        chunks.append(param.detach().cpu().numpy().astype(np.float64).ravel())
    return np.concatenate(chunks)


def load_dataset(config: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    if config.dataset != "digits":
        raise ValueError(f"unknown dataset {config.dataset!r}")
    data = load_digits()
    x = (data.data / 16.0).astype(np.float32).reshape(-1, 1, 8, 8)
    y = data.target.astype(np.int64)
    return x, y


@dataclass
class RunResult:
    run_index: int
    val_proportion: float
    stopping: str
    test_accuracy: float
    best_step: int
    records: list[dict] = field(default_factory=list)


def _accuracy(model: nn.Module, x: torch.Tensor, y: torch.Tensor) -> float:
    with torch.no_grad():
        pred = model(x).argmax(dim=1)
        return float((pred == y).float().mean())


def run_one(config: ExperimentConfig, run_index: int) -> RunResult:
    seed = config.seed * 10_000 + run_index
    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)

    x, y = load_dataset(config)
    order = rng.permutation(len(x))
    test_idx = order[: config.test_size]
    pool_idx = order[config.test_size: config.test_size + config.pool_size]
    n_val = int(round(config.val_proportion * len(pool_idx)))
    val_idx = pool_idx[:n_val]
    train_idx = pool_idx[n_val:]

    to_t = lambda a: torch.from_numpy(a)
    x_train, y_train = to_t(x[train_idx]), to_t(y[train_idx])
    x_val, y_val = to_t(x[val_idx]), to_t(y[val_idx])
    x_test, y_test = to_t(x[test_idx]), to_t(y[test_idx])

    model = SmallCnn()
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss()

    batches_per_epoch = max(1, int(np.ceil(len(train_idx) / config.batch_size)))
    eval_every = max(1, int(round(config.eval_frequency * batches_per_epoch)))

    monitor = binding.make_monitor(config.patience, mode="max")
    best_state = copy.deepcopy(model.state_dict())
    best_step = 0
    records: list[dict] = []
    step = 0
    evals = 0
    stopped = False

    for _ in range(config.max_epochs):
        perm = torch.from_numpy(rng.permutation(len(train_idx)))
        for start in range(0, len(train_idx), config.batch_size):
            idx = perm[start: start + config.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(x_train[idx]), y_train[idx])
            loss.backward()
            optimizer.step()
            step += 1

            if step % eval_every != 0:
                continue
            train_acc = _accuracy(model, x_train, y_train)
            mlh_value = binding.mlh_of_buffer(weight_buffer(model))
            val_acc = _accuracy(model, x_val, y_val) if n_val else None
            records.append({
                "step": step,
                "train_acc": train_acc,
                "mlh": mlh_value,
                "val_acc": val_acc,
            })
            evals += 1
            if evals <= config.warmup_evals:
                # Burn-in: both criteria move through a sharp transient while
                # the network leaves its initialization; the monitor only
                # starts once that phase is over.
                continue
            criterion = mlh_value if config.stopping == "mlh" else val_acc
            decision = monitor.observe(criterion)
            if decision is binding.IMPROVED:
                best_state = copy.deepcopy(model.state_dict())
                best_step = step
            elif decision is binding.STOP:
                stopped = True
                break
        if stopped:
            break

    model.load_state_dict(best_state)
    return RunResult(
        run_index=run_index,
        val_proportion=config.val_proportion,
        stopping=config.stopping,
        test_accuracy=_accuracy(model, x_test, y_test),
        best_step=best_step,
        records=records,
    )


def collect_records(config: ExperimentConfig, skip_evals: Optional[int] = None) -> list:
    """Pooled post-warmup evaluation records across config.n_runs runs.

    Returns core run records (step, train accuracy, MLH, validation accuracy)
    suitable for the correlation tables. The first `skip_evals` evaluations of
    each run (default: config.warmup_evals) are dropped, for the same reason
    the stopping monitor ignores them: they sit on a sharp optimization
    transient that carries no generalization signal.
    """
    if config.val_proportion == 0.0:
        raise ValueError("collect_records needs a validation split")
    if skip_evals is None:
        skip_evals = config.warmup_evals
    # Full-length trajectories: disable early stopping for data collection.
    config = dataclasses.replace(config, patience=10**9)
    records = []
    for run_index in range(config.n_runs):
        result = run_one(config, run_index)
        for rec in result.records[skip_evals:]:
            records.append(binding.make_record(
                rec["step"], rec["train_acc"], rec["mlh"], rec["val_acc"]))
    return records


def run_sweep(configs: list[ExperimentConfig], out_dir: Path) -> dict:
    """Run every config n_runs times; write runs.csv and summary.json.

    runs.csv follows the core CLI schema (step,train_acc,mlh,val_acc) with
    extra provenance columns, so `blm correlate --input runs.csv` works on it
    directly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    with open(out_dir / "runs.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "train_acc", "mlh", "val_acc",
                         "run", "val_proportion", "stopping"])
        for config in configs:
            accuracies = []
            for run_index in range(config.n_runs):
                result = run_one(config, run_index)
                accuracies.append(result.test_accuracy)
                for rec in result.records:
                    writer.writerow([
                        rec["step"],
                        f"{rec['train_acc']:.9g}",
                        f"{rec['mlh']:.9g}",
                        "" if rec["val_acc"] is None else f"{rec['val_acc']:.9g}",
                        run_index,
                        f"{config.val_proportion:.9g}",
                        config.stopping,
                    ])
            summary_rows.append({
                "stopping": config.stopping,
                "val_proportion": config.val_proportion,
                "n_runs": config.n_runs,
                "mean_test_accuracy": float(np.mean(accuracies)),
                "std_test_accuracy": float(np.std(accuracies)),
            })
    summary = {"dataset": configs[0].dataset, "settings": summary_rows}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary
