from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from vmdtex.dataset import Manifest, SampleMeta


def two_tone(n: int = 128):
    """Low tone along x plus a diagonal tone near Nyquist; returns (image, low, high)."""
    y, x = np.mgrid[0:n, 0:n].astype(np.float64)
    low = np.cos(2 * np.pi * 5 * x / n)
    high = np.cos(2 * np.pi * (60 * x + 60 * y) / n)
    return low + high, low, high


def make_manifest(n_patients: int, images_per_patient: int = 2, mags=(40,)) -> Manifest:
    samples = []
    for p in range(n_patients):
        cls, code = ("benign", "B") if p % 2 == 0 else ("malignant", "M")
        for i in range(images_per_patient):
            mag = mags[i % len(mags)]
            name = f"SOB_{code}_XX-14-{1000 + p}-{mag}-{i + 1:03d}.png"
            samples.append(SampleMeta(f"/data/{name}", f"SOB-14-{1000 + p}", cls, "XX", mag, i + 1))
    return Manifest.from_samples(samples)


def write_png(path, array) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(criterion: int, ok: bool, detail: str) -> bool:
        line = f"AC{criterion:<2d} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
