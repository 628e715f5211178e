"""Per-mode descriptor extraction and concatenation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from ..errors import NonFinite
from ..vmd import DecompositionTree
from .entropy import intensity_histogram, kapur_entropy, renyi_entropy, yager_entropy
from .fractal import fractal_dimension
from .zernike import ZernikeSpec, zernike_magnitudes

SCALAR_FEATURES = ("KE", "RE", "YE", "FD")


@dataclass(frozen=True)
class EntropyOrders:
    renyi: float = 2.0
    kapur_a: float = 0.5
    kapur_b: float = 2.0
    yager_denominator: str = "bins"


@dataclass
class FeatureVector:
    values: np.ndarray
    names: list[str]
    label: str | None = None

    def __len__(self) -> int:
        return len(self.names)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


def resample_bilinear(img: np.ndarray, n: int) -> np.ndarray:
    """Bilinear resampling to ``n x n`` with pixel-centre alignment."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape == (n, n):
        return img.copy()
    rows, cols = img.shape
    r = (np.arange(n) + 0.5) * rows / n - 0.5
    c = (np.arange(n) + 0.5) * cols / n - 0.5
    rr, cc = np.meshgrid(r, c, indexing="ij")
    return map_coordinates(img, [rr, cc], order=1, mode="nearest")


def mode_feature_names(prefix: str, spec: ZernikeSpec) -> list[str]:
    names = [f"{prefix}/zern_p{p}_q{q}" for p, q in spec.orders]
    return names + [f"{prefix}/{s}" for s in SCALAR_FEATURES]


def feature_names(levels: int, spec: ZernikeSpec) -> list[str]:
    names = []
    for level in range(1, levels + 1):
        for which in ("lo", "hi"):
            names += mode_feature_names(f"comp{level}{which}", spec)
    return names


def mode_features(mode: np.ndarray, spec: ZernikeSpec, orders: EntropyOrders) -> np.ndarray:
    """Zernike magnitudes followed by KE, RE, YE and FD for one spatial mode."""
    grid = resample_bilinear(mode, spec.grid_side)
    zern = list(zernike_magnitudes(grid, spec).values())
    hist = intensity_histogram(grid)
    scalars = [
        kapur_entropy(hist, orders.kapur_a, orders.kapur_b),
        renyi_entropy(hist, orders.renyi),
        yager_entropy(hist, orders.yager_denominator),
        fractal_dimension(grid),
    ]
    return np.array(zern + scalars, dtype=np.float64)


def extract_features(
    tree: DecompositionTree,
    spec: ZernikeSpec = ZernikeSpec(),
    orders: EntropyOrders = EntropyOrders(),
    label: str | None = None,
) -> FeatureVector:
    """Concatenate the descriptors of every component in flattened tree order."""
    for i, m in enumerate(tree.components):
        if not np.all(np.isfinite(m.spatial)):
            raise NonFinite(f"component {i} contains NaN or Inf")
    values = np.concatenate([mode_features(m.spatial, spec, orders) for m in tree.components])
    if not np.all(np.isfinite(values)):
        raise NonFinite("feature extraction produced non-finite values")
    return FeatureVector(values, feature_names(len(tree.levels), spec), label)
