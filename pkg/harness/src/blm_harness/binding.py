"""Flat-buffer binding over the core metrics library.

The harness talks to the core exclusively through this thin surface: MLH and
EIC on flat float buffers, plus the patience monitor. Keeping it in one
module makes the dependency edge explicit and easy to audit.
"""
from __future__ import annotations

import numpy as np

import blm


def mlh_of_buffer(buffer: np.ndarray) -> float:
    return blm.mlh(np.asarray(buffer, dtype=np.float64).ravel()).value


def eic(train_accuracy: float, mlh_value: float) -> float:
    return blm.eic(train_accuracy, mlh_value)


def eic_scaled(train_accuracy: float, mlh_value: float) -> float:
    return blm.eic_scaled(train_accuracy, mlh_value)


def make_monitor(patience: int, mode: str = "max") -> blm.StopMonitor:
    return blm.StopMonitor(blm.StopConfig(patience=patience, mode=mode))


def make_record(step: int, train_accuracy: float, mlh_value: float,
                val_accuracy: float | None = None) -> blm.RunRecord:
    return blm.RunRecord(step=step, train_accuracy=train_accuracy,
                         mlh=mlh_value, val_accuracy=val_accuracy)


def correlation_summary(records) -> dict[str, float]:
    """Spearman rows (A, MLH, -EIC, ...) and GPR rows, as one flat dict."""
    rows = dict(blm.correlation_table(records))
    rows.update(dict(blm.gpr_correlation_rows(records)))
    return rows


STOP = blm.Decision.STOP
IMPROVED = blm.Decision.IMPROVED
