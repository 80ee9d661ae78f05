"""Information criteria built on MLH, classical baselines, and correlations.

The EIC family combines training accuracy A with the MLH score of the model's
weights; lower is better, like AIC/BIC. All logarithms are natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import UndefinedCorrelationError

_MIN_DENOM = 1e-15


@dataclass(frozen=True)
class RunRecord:
    """One evaluation point of a training run."""

    step: int
    train_accuracy: float
    mlh: float
    val_accuracy: Optional[float] = None

    def __post_init__(self) -> None:
        if self.step < 0:
            raise ValueError("step must be non-negative")
        if not 0.0 <= self.train_accuracy <= 1.0:
            raise ValueError("train_accuracy must be in [0, 1]")
        if not -1.0 <= self.mlh <= 1.0:
            raise ValueError("mlh must be in [-1, 1]")
        if self.val_accuracy is not None and not 0.0 <= self.val_accuracy <= 1.0:
            raise ValueError("val_accuracy must be in [0, 1]")


@dataclass(frozen=True)
class ScalingConstants:
    """Min-max scaling constants for MLH; defaults are the RGB-dataset range."""

    mlh_min: float = 0.9462
    mlh_range: float = 0.0537

    def __post_init__(self) -> None:
        if not self.mlh_range > 0:
            raise ValueError("mlh_range must be positive")


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation. Raises on length mismatch or zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"x and y must be equal-length 1-D, got {x.shape}, {y.shape}")
    if x.size < 2:
        raise ValueError("need at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float((xc * xc).mean()) * float((yc * yc).mean()))
    if denom < _MIN_DENOM:
        raise UndefinedCorrelationError("zero variance in an argument")
    r = float((xc * yc).mean() / denom)
    return min(1.0, max(-1.0, r))


def average_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties assigned their group's mean rank."""
    x = np.asarray(x, dtype=np.float64)
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    avg = upper - (counts - 1) / 2.0
    return avg[inverse]


def spearman_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average-ranked data."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"x and y must be equal-length 1-D, got {x.shape}, {y.shape}")
    return pearson_r(average_ranks(x), average_ranks(y))


def eic(A: float, mlh: float) -> float:
    """Unscaled criterion: -A - MLH."""
    return -A - mlh


def eic_scaled(A: float, mlh: float,
               constants: ScalingConstants = ScalingConstants()) -> float:
    """Criterion with min-max scaled MLH: -A - (MLH - min)/range."""
    return -A - (mlh - constants.mlh_min) / constants.mlh_range


def eic_sr(A: float, mlh: float) -> float:
    """Symbolic-regression variant: -ln(MLH)/A. Requires MLH > 0 and A > 0."""
    if mlh <= 0:
        raise ValueError(f"mlh must be positive for eic_sr, got {mlh}")
    if A == 0:
        raise ZeroDivisionError("A must be nonzero for eic_sr")
    return -math.log(mlh) / A


def aic(L: float, p: int) -> float:
    """-2 ln L + 2 p."""
    if L <= 0:
        raise ValueError("L must be positive")
    return -2.0 * math.log(L) + 2.0 * p


def bic(L: float, p: int, n: int) -> float:
    """-2 ln L + 2 p ln n (2p, not p: implemented as printed in the source)."""
    if L <= 0:
        raise ValueError("L must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    return -2.0 * math.log(L) + 2.0 * p * math.log(n)


# Row labels for the correlation table; order is fixed for stable output.
CORRELATION_METRICS = ("A", "MLH", "-EIC", "-EIC_scaled", "-EIC_SR")


def correlation_table(records: Sequence[RunRecord],
                      constants: ScalingConstants = ScalingConstants()
                      ) -> list[tuple[str, float]]:
    """Spearman correlation of each criterion against validation accuracy.

    Rows: A, MLH, -EIC, -EIC_scaled, -EIC_SR. All records must carry a
    validation accuracy; at least 3 records are required.
    """
    if len(records) < 3:
        raise ValueError("need at least 3 records")
    if any(r.val_accuracy is None for r in records):
        raise ValueError("all records must have val_accuracy")
    val = np.array([r.val_accuracy for r in records])
    columns = {
        "A": np.array([r.train_accuracy for r in records]),
        "MLH": np.array([r.mlh for r in records]),
        "-EIC": np.array([-eic(r.train_accuracy, r.mlh) for r in records]),
        "-EIC_scaled": np.array(
            [-eic_scaled(r.train_accuracy, r.mlh, constants) for r in records]
        ),
        "-EIC_SR": np.array(
            [-eic_sr(r.train_accuracy, r.mlh) for r in records]
        ),
    }
    return [(name, spearman_r(columns[name], val)) for name in CORRELATION_METRICS]
