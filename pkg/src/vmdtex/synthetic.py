"""Procedural two-class texture corpus in BreakHis layout.

Benign patients get coarse oriented gratings, malignant patients fine ones;
orientation, phase, contrast, background shading and noise vary per patient
and per image.  Files are written as RGB PNGs with BreakHis-style names, so
the normal indexing and loading path is exercised end to end.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import BENIGN, MAGNIFICATIONS, MALIGNANT

# dominant spatial frequency ranges, cycles/pixel
FREQUENCY_BANDS = {BENIGN: (0.05, 0.08), MALIGNANT: (0.16, 0.22)}


def texture(rng: np.random.Generator, shape: tuple[int, int], band: tuple[float, float], theta0: float) -> np.ndarray:
    h, w = shape
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    freq = rng.uniform(*band)
    theta = theta0 + rng.normal(0.0, 0.2)
    phase = rng.uniform(0.0, 2 * np.pi)
    contrast = rng.uniform(0.25, 0.35)
    grating = np.cos(2 * np.pi * freq * (x * np.cos(theta) + y * np.sin(theta)) + phase)
    # slow background shading
    sx, sy = rng.uniform(-0.001, 0.001, 2)
    shade = 0.5 + rng.uniform(-0.05, 0.05) + sx * (x - w / 2) + sy * (y - h / 2)
    img = shade + contrast * grating + rng.normal(0.0, 0.02, shape)
    return np.clip(img, 0.0, 1.0)


def generate_synthetic_dataset(
    root: str | os.PathLike,
    patients_per_class: int = 10,
    images_per_patient: int = 5,
    size: tuple[int, int] = (96, 96),
    seed: int = 0,
) -> list[Path]:
    """Write the corpus below ``root`` and return the file paths in write order.

    Magnifications cycle through 40/100/200/400 along each patient's images.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    paths = []
    for cls, code, slide_base in ((BENIGN, "B", 1000), (MALIGNANT, "M", 2000)):
        out = root / cls
        out.mkdir(parents=True, exist_ok=True)
        for p in range(patients_per_class):
            theta0 = rng.uniform(0.0, np.pi)
            for i in range(images_per_patient):
                mag = MAGNIFICATIONS[i % len(MAGNIFICATIONS)]
                green = texture(rng, tuple(size), FREQUENCY_BANDS[cls], theta0)
                g8 = np.round(green * 255).astype(np.uint8)
                r8 = np.clip(g8.astype(np.int64) + 40, 0, 255).astype(np.uint8)
                b8 = np.clip(255 - g8.astype(np.int64) // 2, 0, 255).astype(np.uint8)
                name = f"SOB_{code}_SY-20-{slide_base + p}-{mag}-{i + 1:03d}.png"
                path = out / name
                Image.fromarray(np.stack([r8, g8, b8], axis=-1)).save(path)
                paths.append(path)
    return paths
