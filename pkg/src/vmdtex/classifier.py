"""Least-squares SVM with an RBF kernel.

Training solves the symmetric KKT system::

    [ 0   y^T           ] [b]     [0]
    [ y   Omega + I/gamma] [alpha] = [1]

with ``Omega_ij = y_i y_j K(x_i, x_j)``.  The decision value is
``sum_i alpha_i y_i K(x_i, x) + b``; malignant (+1) wins ties at zero.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.linalg import solve
from scipy.spatial.distance import cdist
from sklearn.model_selection import StratifiedKFold

from .errors import ConfigError, DimensionMismatch, IllConditioned, NumericalError, SingleClass
from .selection import ZScoreStats, zscore_apply

log = logging.getLogger(__name__)

KKT_TOLERANCE = 1e-8
CLASS_MAP = {"malignant": 1, "benign": -1}


def rbf_kernel(x, z, sigma: float) -> float:
    """``exp(-||x - z||^2 / (2 sigma^2))`` for two vectors."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if x.shape != z.shape:
        raise DimensionMismatch(f"kernel inputs differ in shape: {x.shape} vs {z.shape}")
    if not sigma > 0:
        raise ConfigError(f"sigma must be > 0, got {sigma}")
    d = x - z
    return float(np.exp(-np.dot(d, d) / (2.0 * sigma * sigma)))


def rbf_matrix(A: np.ndarray, B: np.ndarray, sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise ConfigError(f"sigma must be > 0, got {sigma}")
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * sigma * sigma))


def kkt_system(X: np.ndarray, y: np.ndarray, gamma: float, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    n = len(y)
    A = np.zeros((n + 1, n + 1))
    A[0, 1:] = y
    A[1:, 0] = y
    A[1:, 1:] = np.outer(y, y) * rbf_matrix(X, X, sigma) + np.eye(n) / gamma
    rhs = np.ones(n + 1)
    rhs[0] = 0.0
    return A, rhs


@dataclass
class LsSvmModel:
    support_inputs: np.ndarray
    support_labels: np.ndarray
    alphas: np.ndarray
    bias: float
    gamma: float
    sigma: float
    kkt_residual: float = 0.0
    feature_mask: list[str] | None = None
    norm_stats: ZScoreStats | None = None
    class_map: dict[str, int] = field(default_factory=lambda: dict(CLASS_MAP))

    @property
    def n_features(self) -> int:
        return self.support_inputs.shape[1]

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        K = rbf_matrix(X, self.support_inputs, self.sigma)
        return K @ (self.alphas * self.support_labels) + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def to_dict(self) -> dict:
        return {
            "alphas": self.alphas.tolist(),
            "bias": float(self.bias),
            "gamma": float(self.gamma),
            "sigma": float(self.sigma),
            "support_inputs": self.support_inputs.tolist(),
            "support_labels": self.support_labels.astype(int).tolist(),
            "feature_mask": self.feature_mask,
            "norm_stats": self.norm_stats.to_dict() if self.norm_stats is not None else None,
            "class_map": self.class_map,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LsSvmModel":
        norm = d.get("norm_stats")
        return cls(
            support_inputs=np.asarray(d["support_inputs"], dtype=np.float64),
            support_labels=np.asarray(d["support_labels"], dtype=np.float64),
            alphas=np.asarray(d["alphas"], dtype=np.float64),
            bias=float(d["bias"]),
            gamma=float(d["gamma"]),
            sigma=float(d["sigma"]),
            feature_mask=d.get("feature_mask"),
            norm_stats=ZScoreStats.from_dict(norm) if norm is not None else None,
            class_map=dict(d.get("class_map") or CLASS_MAP),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LsSvmModel":
        return cls.from_dict(json.loads(text))

    def prepare(self, values: np.ndarray, names: list[str]) -> np.ndarray:
        """Apply the embedded column selection and normalisation to raw features."""
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        if self.feature_mask is not None:
            index = {n: i for i, n in enumerate(names)}
            try:
                cols = [index[n] for n in self.feature_mask]
            except KeyError as exc:
                raise DimensionMismatch(f"feature {exc.args[0]!r} missing from input") from exc
            values = values[:, cols]
        if self.norm_stats is not None:
            values = zscore_apply(self.norm_stats, values)
        return values


def train_lssvm(X, y, gamma: float, sigma: float) -> LsSvmModel:
    """Fit an LS-SVM by one direct symmetric solve (LDL^T with symmetric pivoting).

    Raises :class:`SingleClass` when only one label is present and
    :class:`IllConditioned` when the relative KKT residual exceeds 1e-8.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.size} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if np.unique(y).size < 2:
        raise SingleClass("LS-SVM training needs both classes")
    if not gamma > 0:
        raise ConfigError(f"gamma must be > 0, got {gamma}")
    A, rhs = kkt_system(X, y, gamma, sigma)
    try:
        sol = solve(A, rhs, assume_a="sym", check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise IllConditioned(f"KKT solve failed: {exc}") from exc
    residual = float(np.linalg.norm(A @ sol - rhs) / np.linalg.norm(rhs))
    if not residual <= KKT_TOLERANCE:
        raise IllConditioned(f"KKT relative residual {residual:.3e} exceeds {KKT_TOLERANCE}")
    return LsSvmModel(
        support_inputs=X.copy(),
        support_labels=y.copy(),
        alphas=sol[1:],
        bias=float(sol[0]),
        gamma=float(gamma),
        sigma=float(sigma),
        kkt_residual=residual,
    )


def predict(model: LsSvmModel, x) -> tuple[int, float]:
    """Label and raw decision value for a single prepared feature vector."""
    score = float(model.decision_function(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])
    return (1 if score >= 0 else -1), score


@dataclass
class GridCell:
    gamma: float
    sigma: float
    accuracy: float | None
    fold_accuracies: list[float]
    failed: bool = False
    error: str | None = None


def grid_search(
    X,
    y,
    gamma_grid=(0.1, 1.0, 10.0, 100.0, 1000.0),
    sigma_grid=(0.5, 1.0, 2.0, 4.0, 8.0, 16.0),
    inner_folds: int = 5,
    seed: int = 0,
) -> tuple[float, float, list[GridCell]]:
    """Stratified inner cross-validation over a (gamma, sigma) grid.

    Returns the cell with the highest mean inner accuracy (ties: smaller gamma,
    then smaller sigma) and the full table in grid order.  A cell whose
    training fails is marked ``failed`` and skipped.  ``inner_folds`` is
    reduced to the smallest class size when that is smaller.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if not len(gamma_grid) or not len(sigma_grid):
        raise ConfigError("hyperparameter grids must be non-empty")
    if inner_folds < 2:
        raise ConfigError(f"inner_folds must be >= 2, got {inner_folds}")
    smallest = int(min(np.sum(y == 1), np.sum(y == -1)))
    if smallest < 2:
        raise SingleClass("grid search needs at least two samples of each class")
    folds = min(inner_folds, smallest)
    splits = list(StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed).split(X, y))

    table: list[GridCell] = []
    for gamma, sigma in product(gamma_grid, sigma_grid):
        accs = []
        try:
            for tr, va in splits:
                model = train_lssvm(X[tr], y[tr], gamma, sigma)
                accs.append(float(np.mean(model.predict(X[va]) == y[va])))
        except (NumericalError, SingleClass) as exc:
            log.debug("grid cell gamma=%s sigma=%s failed: %s", gamma, sigma, exc)
            table.append(GridCell(float(gamma), float(sigma), None, accs, True, str(exc)))
            continue
        table.append(GridCell(float(gamma), float(sigma), float(np.mean(accs)), accs))

    ok = [c for c in table if not c.failed]
    if not ok:
        raise IllConditioned("every grid cell failed to train")
    best = min(ok, key=lambda c: (-c.accuracy, c.gamma, c.sigma))
    return best.gamma, best.sigma, table
