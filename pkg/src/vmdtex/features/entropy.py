"""Grey-level histograms and the Renyi, Kapur and Yager entropies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BadOrder

GRAY_LEVELS = 256


def quantize(values: np.ndarray, levels: int = GRAY_LEVELS) -> np.ndarray:
    """Min-max rescale to integer levels ``0..levels-1``; constant input maps to 0.

    Uses equal-width bins (``floor(v * levels)``, top edge folded into the last
    level) so uniformly spread values fill every level evenly.
    """
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if not hi > lo:
        return np.zeros(values.shape, dtype=np.int64)
    scaled = (values - lo) / (hi - lo)
    return np.minimum((scaled * levels).astype(np.int64), levels - 1)


@dataclass(frozen=True)
class Histogram:
    probabilities: np.ndarray
    source_pixels: int

    @property
    def bins(self) -> int:
        return self.probabilities.size


def intensity_histogram(mode: np.ndarray, levels: int = GRAY_LEVELS) -> Histogram:
    mode = np.asarray(mode, dtype=np.float64)
    counts = np.bincount(quantize(mode, levels).ravel(), minlength=levels)
    return Histogram(counts / mode.size, int(mode.size))


def _probs(hist) -> np.ndarray:
    q = hist.probabilities if isinstance(hist, Histogram) else np.asarray(hist, dtype=np.float64)
    return q


def _power_sum(q: np.ndarray, a: float) -> float:
    nz = q[q > 0]
    return float(np.sum(nz**a))


def renyi_entropy(hist, a: float = 2.0) -> float:
    """``log2(sum q^a) / (1 - a)``; empty bins contribute nothing."""
    if not a > 0 or a == 1:
        raise BadOrder(f"Renyi order must be positive and != 1, got {a}")
    return float(np.log2(_power_sum(_probs(hist), a)) / (1.0 - a)) + 0.0


def kapur_entropy(hist, a: float = 0.5, b: float = 2.0) -> float:
    """``log2(sum q^a / sum q^b) / (b - a)``."""
    if not (a > 0 and b > 0) or a == b:
        raise BadOrder(f"Kapur orders must be positive and distinct, got a={a}, b={b}")
    q = _probs(hist)
    return float(np.log2(_power_sum(q, a) / _power_sum(q, b)) / (b - a)) + 0.0


def yager_entropy(hist, denominator: str = "bins") -> float:
    """``1 - sum|2q - 1| / D``.

    ``denominator="bins"`` uses D = number of grey levels, which puts the
    value in ``[0, 2/levels]`` and gives 0 for a single occupied bin.
    ``denominator="pixels"`` uses D = pixel count of the source image.
    """
    q = _probs(hist)
    if denominator == "bins":
        d = q.size
    elif denominator == "pixels":
        if not isinstance(hist, Histogram):
            raise ValueError("pixel denominator needs a Histogram with source_pixels")
        d = hist.source_pixels
    else:
        raise ValueError(f"unknown Yager denominator {denominator!r}")
    return float(1.0 - np.sum(np.abs(2.0 * q - 1.0)) / d) + 0.0
