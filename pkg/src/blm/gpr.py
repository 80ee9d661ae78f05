"""Minimal RBF-kernel Gaussian process regressor.

Estimator-style API (fit / predict / get_params) so it drops into sklearn-like
pipelines. Hyperparameters (length scale, noise variance) are picked by grid
search maximizing the log marginal likelihood; the signal variance is tied to
var(y) and targets are mean-centered. Solves go through a Cholesky
factorization with escalating jitter.
"""
from __future__ import annotations

import math
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .criteria import RunRecord, spearman_r
from .errors import IllConditionedError

DEFAULT_LENGTH_SCALES = tuple(np.logspace(math.log10(0.01), math.log10(10.0), 13))
DEFAULT_NOISE_VARS = tuple(np.logspace(-6, -1, 6))
_MAX_JITTER = 1e-4


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    return np.maximum(d2, 0.0)


def _rbf(a: np.ndarray, b: np.ndarray, signal_var: float, length_scale: float) -> np.ndarray:
    return signal_var * np.exp(-_sq_dists(a, b) / (2.0 * length_scale**2))


def _chol_with_jitter(A: np.ndarray, jitter: float) -> tuple[np.ndarray, float]:
    n = A.shape[0]
    while jitter <= _MAX_JITTER:
        try:
            return np.linalg.cholesky(A + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise IllConditionedError("kernel matrix is not positive definite even with jitter")


class GprRegressor:
    """GP regression with an isotropic RBF kernel and white noise."""

    def __init__(self, length_scale: float = 1.0, noise_var: float = 1e-6,
                 jitter: float = 1e-8) -> None:
        self.length_scale = length_scale
        self.noise_var = noise_var
        self.jitter = jitter

    def get_params(self, deep: bool = True) -> dict:
        return {
            "length_scale": self.length_scale,
            "noise_var": self.noise_var,
            "jitter": self.jitter,
        }

    def set_params(self, **params) -> "GprRegressor":
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def _validate(self, X, y=None) -> tuple[np.ndarray, Optional[np.ndarray]]:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValueError("X must be a 2-D array (n samples x d features)")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        if y is None:
            return X, None
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y length mismatch")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite entries")
        return X, y

    def _lml(self, X: np.ndarray, yc: np.ndarray, signal_var: float,
             length_scale: float, noise_var: float) -> float:
        n = X.shape[0]
        A = _rbf(X, X, signal_var, length_scale) + noise_var * np.eye(n)
        L, _ = _chol_with_jitter(A, self.jitter)
        alpha = np.linalg.solve(L.T, np.linalg.solve(L, yc))
        return float(
            -0.5 * yc @ alpha
            - np.sum(np.log(np.diag(L)))
            - 0.5 * n * math.log(2.0 * math.pi)
        )

    def fit(self, X, y,
            hyper_grid: Optional[Sequence[tuple[float, float]]] = None) -> "GprRegressor":
        """Fit on (X, y), choosing (length_scale, noise_var) from the grid."""
        X, y = self._validate(X, y)
        if X.shape[0] < 2:
            raise ValueError("need at least 2 training points")
        if hyper_grid is None:
            hyper_grid = list(product(DEFAULT_LENGTH_SCALES, DEFAULT_NOISE_VARS))
        if not hyper_grid:
            raise ValueError("hyper_grid must be non-empty")
        self.y_mean_ = float(y.mean())
        yc = y - self.y_mean_
        self.signal_var_ = float(yc.var())
        best = None
        for ls, nv in hyper_grid:
            lml = self._lml(X, yc, self.signal_var_, float(ls), float(nv))
            if best is None or lml > best[0]:
                best = (lml, float(ls), float(nv))
        assert best is not None
        self.log_marginal_likelihood_, self.length_scale_, self.noise_var_ = best
        self.train_inputs_ = X
        n = X.shape[0]
        A = _rbf(X, X, self.signal_var_, self.length_scale_) + self.noise_var_ * np.eye(n)
        self.L_, self.jitter_ = _chol_with_jitter(A, self.jitter)
        self.alpha_ = np.linalg.solve(self.L_.T, np.linalg.solve(self.L_, yc))
        return self

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and (clamped non-negative) variance at X."""
        if not hasattr(self, "alpha_"):
            raise ValueError("predict() before fit()")
        X, _ = self._validate(X)
        if X.shape[1] != self.train_inputs_.shape[1]:
            raise ValueError(
                f"X has {X.shape[1]} features, model was fit with "
                f"{self.train_inputs_.shape[1]}"
            )
        k_star = _rbf(self.train_inputs_, X, self.signal_var_, self.length_scale_)
        mean = k_star.T @ self.alpha_ + self.y_mean_
        v = np.linalg.solve(self.L_, k_star)
        variance = self.signal_var_ - np.sum(v * v, axis=0)
        return mean, np.maximum(variance, 0.0)

    def loo_predictions(self) -> np.ndarray:
        """Leave-one-out posterior means at the training points.

        Uses mu_i = y_i - alpha_i / (K + sigma_n^2 I)^-1_ii, so no refits.
        """
        if not hasattr(self, "alpha_"):
            raise ValueError("loo_predictions() before fit()")
        n = self.train_inputs_.shape[0]
        L_inv = np.linalg.solve(self.L_, np.eye(n))
        K_inv_diag = np.sum(L_inv * L_inv, axis=0)
        yc = self.L_ @ (self.L_.T @ self.alpha_)  # centered training targets
        return (yc - self.alpha_ / K_inv_diag) + self.y_mean_


def fit_gpr(X, y, hyper_grid: Optional[Sequence[tuple[float, float]]] = None) -> GprRegressor:
    return GprRegressor().fit(X, y, hyper_grid)


# Feature sets for the correlation table rows.
GPR_FEATURE_SETS = (
    ("GPR(A)", ("A",)),
    ("GPR(MLH)", ("MLH",)),
    ("GPR(MLH, A)", ("MLH", "A")),
)


def gpr_correlation_rows(records: Sequence[RunRecord]) -> list[tuple[str, float]]:
    """Spearman of leave-one-out GPR predictions against validation accuracy."""
    if len(records) < 10:
        raise ValueError("need at least 10 records")
    if any(r.val_accuracy is None for r in records):
        raise ValueError("all records must have val_accuracy")
    columns = {
        "A": np.array([r.train_accuracy for r in records]),
        "MLH": np.array([r.mlh for r in records]),
    }
    y = np.array([r.val_accuracy for r in records])
    rows = []
    for label, features in GPR_FEATURE_SETS:
        X = np.column_stack([columns[f] for f in features])
        model = fit_gpr(X, y)
        rows.append((label, spearman_r(model.loo_predictions(), y)))
    return rows
