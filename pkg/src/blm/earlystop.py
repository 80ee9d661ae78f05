"""Patience-based early stopping driven by any scalar criterion.

The monitor is cadence-agnostic: feed it one criterion value per evaluation
and it answers improved / continue / stop. The caller owns checkpoints and
restores from ``best()`` after a stop.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .errors import MonitorStoppedError


class Decision(enum.Enum):
    IMPROVED = "improved"
    CONTINUE = "continue"
    STOP = "stop"


@dataclass(frozen=True)
class StopConfig:
    patience: int = 15
    mode: str = "max"
    min_delta: float = 0.0

    def __post_init__(self) -> None:
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.mode not in ("max", "min"):
            raise ValueError(f"mode must be 'max' or 'min', got {self.mode!r}")
        if self.min_delta < 0:
            raise ValueError("min_delta must be >= 0")


class StopMonitor:
    """Single-writer state machine; decisions depend only on the value stream.

    Improvement is strict: a value must beat the best by more than min_delta
    in the configured direction. Ties never improve.
    """

    def __init__(self, config: StopConfig = StopConfig()) -> None:
        self.config = config
        self.best_value: Optional[float] = None
        self.best_step: Optional[int] = None
        self.bad_count = 0
        self.step = 0
        self.stopped = False

    def _improves(self, value: float) -> bool:
        if self.best_value is None:
            return True
        if self.config.mode == "max":
            return value > self.best_value + self.config.min_delta
        return value < self.best_value - self.config.min_delta

    def observe(self, value: float) -> Decision:
        if self.stopped:
            raise MonitorStoppedError("observe() called after stop")
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"criterion value must be finite, got {value}")
        current_step = self.step
        self.step += 1
        if self._improves(value):
            self.best_value = value
            self.best_step = current_step
            self.bad_count = 0
            return Decision.IMPROVED
        self.bad_count += 1
        if self.bad_count >= self.config.patience:
            self.stopped = True
            return Decision.STOP
        return Decision.CONTINUE

    def best(self) -> tuple[float, int]:
        if self.best_value is None:
            raise ValueError("no observations yet")
        assert self.best_step is not None
        return self.best_value, self.best_step
