"""Significant-digit extraction, digit histograms, and Benford conformity scores.

The central quantity is the MLH score: the Pearson correlation between the
observed first-digit proportions of a value set and the Benford reference
distribution P(d) = log_b(1 + 1/d).

Digit extraction is exact: a fast vectorized float path handles the bulk of
the input, and any value that lands near a decade boundary (where float
rounding could flip the digit) is re-resolved with integer arithmetic on the
value's exact binary ratio. Zeros, infinities and NaNs are excluded from
histograms and reported in the ``excluded`` count; subnormals are ordinary
nonzero values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from .errors import EmptyInputError, UndefinedCorrelationError

# Width of the "suspicious" band around integer mantissa values; anything
# inside is re-checked exactly. Vector-path rounding error is < 1e-12.
_BOUNDARY_MARGIN = 1e-9
# Pearson denominator below this raises instead of propagating NaN.
_PEARSON_MIN_DENOM = 1e-15


def benford_probs(base: int = 10) -> np.ndarray:
    """Benford probabilities for digits 1..base-1 as a (base-1)-vector."""
    if base < 2:
        raise ValueError(f"base must be >= 2, got {base}")
    d = np.arange(1, base)
    return np.log1p(1.0 / d) / math.log(base)


# Rounded reference vector that circulates in older Benford write-ups; kept
# behind an explicit flag for reproducing results computed against it.
_ROUNDED_BASE10 = np.array([30.1, 17.6, 12.5, 9.7, 7.9, 6.7, 5.8, 5.1, 4.6]) / 100.0


@dataclass(frozen=True)
class BenfordPmf:
    """Reference first-digit distribution for a given base."""

    base: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        if self.base < 2:
            raise ValueError(f"base must be >= 2, got {self.base}")
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (self.base - 1,):
            raise ValueError("probs must have base-1 entries")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)


def benford_pmf(base: int = 10, *, rounded_compat: bool = False) -> BenfordPmf:
    """Build the Benford reference pmf for ``base``.

    ``rounded_compat=True`` returns the two-significant-digit base-10 vector
    ([0.301, 0.176, ...]) instead of the exact logarithms; it exists only for
    byte-compatibility with results computed against that rounding.
    """
    if rounded_compat:
        if base != 10:
            raise ValueError("rounded_compat is defined for base 10 only")
        return BenfordPmf(10, _ROUNDED_BASE10.copy())
    return BenfordPmf(base, benford_probs(base))


@dataclass(frozen=True)
class DigitHistogram:
    """Counts of first significant digits 0..base-1 for a value set.

    Slot 0 is always zero (exact zeros are excluded, never binned); it is
    retained so the counts vector lines up with 10-bin digit code.
    """

    base: int
    counts: np.ndarray
    excluded: int = 0

    def __post_init__(self) -> None:
        if self.base < 2:
            raise ValueError(f"base must be >= 2, got {self.base}")
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (self.base,):
            raise ValueError("counts must have `base` entries")
        if counts[0] != 0:
            raise ValueError("counts[0] must be zero (zeros are excluded)")
        if np.any(counts < 0) or self.excluded < 0:
            raise ValueError("counts must be non-negative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def proportions(self) -> np.ndarray:
        """counts / total; raises on an empty histogram."""
        total = self.total
        if total == 0:
            raise EmptyInputError("histogram is empty")
        return self.counts / total

    def merge(self, other: "DigitHistogram") -> "DigitHistogram":
        if self.base != other.base:
            raise ValueError("cannot merge histograms with different bases")
        return DigitHistogram(
            self.base, self.counts + other.counts, self.excluded + other.excluded
        )

    def __add__(self, other: "DigitHistogram") -> "DigitHistogram":
        return self.merge(other)


@dataclass(frozen=True)
class MlhScore:
    """Pearson correlation of observed digit proportions against Benford."""

    value: float
    n_values: int


def _exact_leading_digit(ax: float, base: int) -> int:
    """First significant digit of ax > 0, exactly.

    Uses integer arithmetic on the value's binary ratio. One wrinkle: a double
    sitting just below a digit boundary d*base^e whose shortest representation
    rounds up to the boundary (e.g. 1e-310) must report the boundary's digit,
    so the boundary itself is checked for rounding to ax.
    """
    num, den = ax.as_integer_ratio()

    def base_pow_le(e: int) -> bool:
        # base**e <= num/den, evaluated exactly
        if e >= 0:
            return den * base**e <= num
        return num * base**(-e) >= den

    e = math.floor(math.log(num, base) - math.log(den, base))
    while not base_pow_le(e):
        e -= 1
    while base_pow_le(e + 1):
        e += 1
    if e >= 0:
        d = int(num // (den * base**e))
    else:
        d = int((num * base**(-e)) // den)

    if d + 1 < base:
        up_digit, up_exp = d + 1, e
    else:
        up_digit, up_exp = 1, e + 1
    try:
        if up_exp >= 0:
            boundary = float(up_digit * base**up_exp)
        else:
            # int/int true division is correctly rounded
            boundary = up_digit / base**(-up_exp)
    except OverflowError:
        boundary = math.inf
    if boundary == ax:
        return up_digit
    return d


def leading_digit(x: float, base: int = 10) -> Optional[int]:
    """First significant digit of |x| in ``base``; None for 0/inf/NaN."""
    if base < 2:
        raise ValueError(f"base must be >= 2, got {base}")
    x = float(x)
    if x == 0.0 or not math.isfinite(x):
        return None
    return _exact_leading_digit(abs(x), base)


def _digits_of(values: np.ndarray, base: int) -> tuple[np.ndarray, int]:
    """Vectorized digit extraction. Returns (digits, n_excluded)."""
    v = np.asarray(values, dtype=np.float64).ravel()
    finite = np.isfinite(v) & (v != 0.0)
    excluded = int(v.size - np.count_nonzero(finite))
    ax = np.abs(v[finite])
    if ax.size == 0:
        return np.empty(0, dtype=np.int64), excluded

    e = np.floor(np.log(ax) / math.log(base))
    with np.errstate(over="ignore", under="ignore"):
        m = ax * np.power(float(base), -np.clip(e, -300.0, 300.0))
    with np.errstate(invalid="ignore"):
        d = np.where(np.isfinite(m), np.floor(m), 0.0)
    suspect = (
        (d < 1)
        | (d >= base)
        | (np.abs(m - np.rint(m)) < _BOUNDARY_MARGIN)
        | (np.abs(e) > 300)
    )
    digits = d.astype(np.int64)
    if np.any(suspect):
        for i in np.nonzero(suspect)[0]:
            digits[i] = _exact_leading_digit(float(ax[i]), base)
    return digits, excluded


def digit_histogram(values: Iterable[float], base: int = 10) -> DigitHistogram:
    """Histogram of first significant digits over ``values``.

    Partition-and-merge equals whole-input histogramming, so large inputs may
    be processed in chunks and combined with ``DigitHistogram.merge``.
    """
    if base < 2:
        raise ValueError(f"base must be >= 2, got {base}")
    arr = np.asarray(values, dtype=np.float64)
    digits, excluded = _digits_of(arr, base)
    counts = np.bincount(digits, minlength=base)
    return DigitHistogram(base, counts, excluded)


def pearson_against_benford(proportions: np.ndarray, base: int = 10) -> float:
    """Population-form Pearson r of a digit pmf (digits 1..base-1) vs Benford."""
    p = np.asarray(proportions, dtype=np.float64)
    q = benford_probs(base)
    if p.shape != q.shape:
        raise ValueError(f"expected {base - 1} digit proportions, got {p.shape}")
    pc = p - p.mean()
    qc = q - q.mean()
    denom = math.sqrt(float((pc * pc).mean()) * float((qc * qc).mean()))
    if denom < _PEARSON_MIN_DENOM:
        raise UndefinedCorrelationError(
            "digit proportions have (near-)zero variance; Pearson r undefined"
        )
    r = float((pc * qc).mean() / denom)
    return min(1.0, max(-1.0, r))


def mlh(values_or_histogram: Union[Iterable[float], DigitHistogram],
        base: int = 10) -> MlhScore:
    """MLH score: Pearson r between observed digit proportions and Benford."""
    if isinstance(values_or_histogram, DigitHistogram):
        hist = values_or_histogram
        base = hist.base
    else:
        hist = digit_histogram(values_or_histogram, base)
    total = hist.total
    if total == 0:
        raise EmptyInputError("no usable values (all zero/non-finite or empty)")
    if total < 2:
        raise EmptyInputError("MLH needs at least 2 usable values")
    value = pearson_against_benford(hist.proportions()[1:], base)
    return MlhScore(value=value, n_values=total)


def _jsd(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence with base-2 logs; in [0, 1]."""
    m = 0.5 * (p + q)

    def kl(a: np.ndarray) -> float:
        mask = a > 0
        return float(np.sum(a[mask] * np.log2(a[mask] / m[mask])))

    return max(0.0, 0.5 * kl(p) + 0.5 * kl(q))


def jsd_benford(histogram: DigitHistogram) -> float:
    """JS divergence between the histogram's digit distribution and Benford."""
    if histogram.total == 0:
        raise EmptyInputError("histogram is empty")
    p = histogram.proportions()[1:]
    return _jsd(p, benford_probs(histogram.base))
