"""ReliefF ranking, Welch significance filtering and z-score normalisation.

Every fitting function takes the training matrix only; test rows never enter
selection or normalisation statistics.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist

from .errors import BadK, DataError, SingleClass


@dataclass
class FeatureMatrix:
    values: np.ndarray
    names: list[str]
    labels: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.names):
            raise DataError(f"values shape {self.values.shape} does not match {len(self.names)} names")
        if self.values.shape[0] != self.labels.shape[0]:
            raise DataError("one label per row required")
        if len(set(self.names)) != len(self.names):
            raise DataError("feature names must be unique")
        if not np.all(np.isfinite(self.values)):
            raise DataError("feature matrix contains NaN or Inf")

    @property
    def column_stats(self) -> dict[str, np.ndarray]:
        v = self.values
        return {"mean": v.mean(0), "std": v.std(0), "min": v.min(0), "max": v.max(0)}

    def subset(self, rows=None, columns=None) -> "FeatureMatrix":
        rows = slice(None) if rows is None else rows
        values = self.values[rows]
        names = self.names
        if columns is not None:
            columns = np.asarray(columns)
            if columns.dtype == bool:
                columns = np.flatnonzero(columns)
            values = values[:, columns]
            names = [self.names[i] for i in columns]
        return FeatureMatrix(values, list(names), self.labels[rows])


@dataclass
class RankedFeatures:
    weights: np.ndarray
    order: np.ndarray
    selected_mask: np.ndarray
    names: list[str]
    p_values: np.ndarray | None = None
    fallback: bool = False

    @property
    def selected(self) -> list[str]:
        return [n for n, keep in zip(self.names, self.selected_mask) if keep]

    def report(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "selected": self.selected,
            "p_values": [float(p) for p in self.p_values] if self.p_values is not None else None,
            "fallback": bool(self.fallback),
        }


def _rank(weights: np.ndarray) -> np.ndarray:
    # descending weight, ties by column index
    return np.lexsort((np.arange(weights.size), -weights))


def relieff(matrix: FeatureMatrix, k_neighbors: int = 10, seed: int = 0) -> RankedFeatures:
    """ReliefF feature weights.

    Features are scaled to [0, 1] by their column range and compared with the
    Manhattan distance.  Every instance is used once; for each, the ``k``
    nearest hits pull the weight down and the ``k`` nearest misses of every
    other class push it up, weighted by that class's prior.  Distance ties
    are resolved by row index, so the result does not depend on ``seed``
    (kept for interface stability).
    """
    X, y = matrix.values, matrix.labels
    classes, y_idx, class_counts = np.unique(y, return_inverse=True, return_counts=True)
    if classes.size < 2:
        raise SingleClass("ReliefF needs at least two classes")
    if k_neighbors < 1 or k_neighbors >= class_counts.min():
        raise BadK(f"k_neighbors={k_neighbors} must be in [1, {class_counts.min() - 1}]")
    n, d = X.shape
    span = X.max(0) - X.min(0)
    scale = np.where(span > 0, span, 1.0)
    Xs = (X - X.min(0)) / scale
    Xs[:, span == 0] = 0.0
    dist = cdist(Xs, Xs, metric="cityblock")
    priors = class_counts / n

    weights = np.zeros(d)
    members = [np.flatnonzero(y_idx == c) for c in range(classes.size)]
    for i in range(n):
        ci = y_idx[i]
        for c, idx in enumerate(members):
            if c == ci:
                idx = idx[idx != i]
            nearest = idx[np.argsort(dist[i, idx], kind="stable")[:k_neighbors]]
            contrib = np.abs(Xs[nearest] - Xs[i]).sum(0)
            if c == ci:
                weights -= contrib
            else:
                weights += priors[c] / (1.0 - priors[ci]) * contrib
    weights /= n * k_neighbors
    return RankedFeatures(
        weights=weights,
        order=_rank(weights),
        selected_mask=weights > 0,
        names=list(matrix.names),
    )


def welch_p_values(matrix: FeatureMatrix) -> np.ndarray:
    """Two-sided Welch t-test p-value per column (two classes)."""
    classes = np.unique(matrix.labels)
    if classes.size != 2:
        raise SingleClass(f"Welch test needs exactly two classes, got {classes.size}")
    a = matrix.values[matrix.labels == classes[0]]
    b = matrix.values[matrix.labels == classes[1]]
    na, nb = len(a), len(b)
    va = a.var(0, ddof=1) / na if na > 1 else np.zeros(a.shape[1])
    vb = b.var(0, ddof=1) / nb if nb > 1 else np.zeros(b.shape[1])
    diff = a.mean(0) - b.mean(0)
    se2 = va + vb
    p = np.ones(a.shape[1])
    ok = se2 > 0
    t = diff[ok] / np.sqrt(se2[ok])
    dof = se2[ok] ** 2 / (
        np.divide(va[ok] ** 2, na - 1, where=na > 1, out=np.zeros_like(t))
        + np.divide(vb[ok] ** 2, nb - 1, where=nb > 1, out=np.zeros_like(t))
    )
    p[ok] = 2.0 * stats.t.sf(np.abs(t), dof)
    # zero spread in both classes: separable iff the means differ
    p[~ok & (np.abs(diff) > 0)] = 0.0
    return p


def significance_filter(
    matrix: FeatureMatrix,
    ranked: RankedFeatures,
    p_threshold: float = 0.05,
    fallback_top: int = 25,
) -> RankedFeatures:
    """Keep features with Welch ``p < p_threshold`` and positive ReliefF weight.

    An empty intersection falls back to the ``fallback_top`` highest-weighted
    features and sets ``fallback``.
    """
    p = welch_p_values(matrix)
    mask = (p < p_threshold) & (ranked.weights > 0)
    fallback = not mask.any()
    if fallback:
        mask = np.zeros_like(mask)
        mask[ranked.order[:fallback_top]] = True
    return replace(ranked, selected_mask=mask, p_values=p, fallback=fallback)


@dataclass
class ZScoreStats:
    mean: np.ndarray
    std: np.ndarray
    min_std: float = field(default=1e-12)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ZScoreStats":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def zscore_fit(train: np.ndarray) -> ZScoreStats:
    train = np.asarray(train, dtype=np.float64)
    return ZScoreStats(train.mean(0), train.std(0))


def zscore_apply(stats_: ZScoreStats, values: np.ndarray) -> np.ndarray:
    """Standardise with training statistics; near-constant columns are only centred."""
    values = np.asarray(values, dtype=np.float64)
    scale = np.where(stats_.std < stats_.min_std, 1.0, stats_.std)
    return (values - stats_.mean) / scale
