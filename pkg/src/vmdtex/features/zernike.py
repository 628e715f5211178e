"""Zernike moment magnitudes on a square grid inscribed in the unit disk."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from ..errors import BadOrder, DimensionMismatch


@dataclass(frozen=True)
class ZernikeSpec:
    max_order: int = 10
    grid_side: int = 128

    def __post_init__(self):
        if self.max_order < 0:
            raise BadOrder(f"max_order must be >= 0, got {self.max_order}")
        if self.grid_side < 2:
            raise BadOrder(f"grid_side must be >= 2, got {self.grid_side}")

    @property
    def orders(self) -> list[tuple[int, int]]:
        """Emitted ``(p, q)`` pairs: ``0 <= q <= p <= P`` with ``p - q`` even."""
        return [(p, q) for p in range(self.max_order + 1) for q in range(p % 2, p + 1, 2)]


def _check_order(p: int, q: int) -> None:
    if not (0 <= q <= p) or (p - q) % 2:
        raise BadOrder(f"invalid Zernike order (p={p}, q={q})")


@lru_cache(maxsize=None)
def radial_coefficients(p: int, q: int) -> tuple[tuple[int, int], ...]:
    """Exact ``(coefficient, power)`` terms of R_pq."""
    _check_order(p, q)
    terms = []
    for s in range((p - q) // 2 + 1):
        c = factorial(p - s) // (
            factorial(s) * factorial((p + q) // 2 - s) * factorial((p - q) // 2 - s)
        )
        terms.append(((-1) ** s * c, p - 2 * s))
    return tuple(terms)


def radial_polynomial(p: int, q: int, r):
    """Evaluate the Zernike radial polynomial R_pq at ``r`` (scalar or array)."""
    r_arr = np.asarray(r, dtype=np.float64)
    if np.any(r_arr < 0) or np.any(r_arr > 1 + 1e-12):
        raise BadOrder("radius must lie in [0, 1]")
    out = np.zeros_like(r_arr)
    for coef, power in radial_coefficients(p, q):
        out = out + float(coef) * r_arr**power
    return float(out) if np.ndim(r) == 0 else out


def grid_coordinates(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel centres mapped so the N x N square sits inside the unit disk.

    Returns ``(x, y)`` arrays of shape ``(n, n)`` indexed ``[row, col]``;
    ``x`` follows the column index and ``y`` the row index.
    """
    c = (2.0 * np.arange(n) + 1.0 - n) / (n * np.sqrt(2.0))
    return np.broadcast_to(c[None, :], (n, n)), np.broadcast_to(c[:, None], (n, n))


@lru_cache(maxsize=8)
def _basis(spec: ZernikeSpec) -> np.ndarray:
    n = spec.grid_side
    x, y = grid_coordinates(n)
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    basis = np.empty((len(spec.orders), n * n), dtype=np.complex128)
    for i, (p, q) in enumerate(spec.orders):
        norm = 2.0 * (p + 1) / (np.pi * n * n)
        basis[i] = (norm * radial_polynomial(p, q, r) * np.exp(-1j * q * theta)).ravel()
    basis.setflags(write=False)
    return basis


def zernike_moments(img: np.ndarray, spec: ZernikeSpec) -> np.ndarray:
    """Complex moments ``Z_pq`` in ``spec.orders`` order (zeroth-order approximation)."""
    img = np.asarray(img, dtype=np.float64)
    n = spec.grid_side
    if img.shape != (n, n):
        raise DimensionMismatch(f"expected a {n}x{n} grid, got {img.shape}")
    return _basis(spec) @ img.ravel()


def zernike_magnitudes(img: np.ndarray, spec: ZernikeSpec) -> dict[tuple[int, int], float]:
    mags = np.abs(zernike_moments(img, spec))
    return {pq: float(m) for pq, m in zip(spec.orders, mags)}
