"""Fractal dimension by differential box counting."""
from __future__ import annotations

import numpy as np

from ..errors import DegenerateImage
from .entropy import GRAY_LEVELS, quantize


def box_counts(levels: np.ndarray, gray_levels: int = GRAY_LEVELS) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(scales, counts)`` for dyadic grid sizes ``s = 2, 4, ..., N/2``.

    ``levels`` is a square grid of integer grey levels.  For grid size ``s``
    the box height is ``s * G / N`` and a block spanning grey levels
    ``[lo, hi]`` needs ``ceil(hi/h) - ceil(lo/h) + 1`` boxes.  ``scales`` holds
    ``N / s``.
    """
    n = levels.shape[0]
    if levels.ndim != 2 or levels.shape[1] != n:
        raise DegenerateImage(f"box counting needs a square grid, got {levels.shape}")
    if n < 8:
        raise DegenerateImage(f"grid side {n} < 8 gives fewer than two box sizes")
    scales, counts = [], []
    s = 2
    while s <= n // 2:
        m = n // s
        blocks = levels[: m * s, : m * s].reshape(m, s, m, s).astype(np.float64)
        h = s * gray_levels / n
        top = np.ceil(blocks.max(axis=(1, 3)) / h)
        bottom = np.ceil(blocks.min(axis=(1, 3)) / h)
        counts.append(float(np.sum(top - bottom + 1.0)))
        scales.append(n / s)
        s *= 2
    return np.array(scales), np.array(counts)


def fractal_dimension(mode: np.ndarray) -> float:
    """Least-squares slope of ``log N_s`` against ``log(N/s)``.

    The mode is min-max rescaled to 256 grey levels first, so the result is
    invariant to affine intensity changes.  A constant grid gives exactly 2.
    """
    scales, counts = box_counts(quantize(mode))
    # base-2 logs keep dyadic scales exact, so a flat surface gives exactly 2
    x = np.log2(scales)
    y = np.log2(counts)
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
