from .entropy import (
    GRAY_LEVELS,
    Histogram,
    intensity_histogram,
    kapur_entropy,
    quantize,
    renyi_entropy,
    yager_entropy,
)
from .extract import (
    EntropyOrders,
    FeatureVector,
    extract_features,
    feature_names,
    mode_features,
    resample_bilinear,
)
from .fractal import box_counts, fractal_dimension
from .zernike import ZernikeSpec, radial_coefficients, radial_polynomial, zernike_magnitudes, zernike_moments

__all__ = [
    "GRAY_LEVELS",
    "EntropyOrders",
    "FeatureVector",
    "Histogram",
    "ZernikeSpec",
    "box_counts",
    "extract_features",
    "feature_names",
    "fractal_dimension",
    "intensity_histogram",
    "kapur_entropy",
    "mode_features",
    "quantize",
    "radial_coefficients",
    "radial_polynomial",
    "renyi_entropy",
    "resample_bilinear",
    "yager_entropy",
    "zernike_magnitudes",
    "zernike_moments",
]
