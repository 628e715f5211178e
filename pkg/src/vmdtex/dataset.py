"""BreakHis-style dataset indexing, patient-wise splitting and image loading.

BreakHis file names encode everything needed for patient-level work::

    SOB_B_TA-14-4659-40-001.png
    │   │ │  │  │    │  └── image sequence within the slide
    │   │ │  │  │    └───── magnification (40/100/200/400)
    │   │ │  │  └────────── slide id (the patient)
    │   │ │  └───────────── year
    │   │ └──────────────── tumour subtype
    │   └────────────────── class (B = benign, M = malignant)
    └────────────────────── biopsy procedure

The patient id is ``procedure-year-slide`` (e.g. ``SOB-14-4659``).
"""
from __future__ import annotations

import csv
import io
import logging
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    BadK,
    ConflictingLabel,
    ConflictingPatientClass,
    DecodeError,
    EmptyDataset,
    MalformedName,
    TooFewPatients,
)

log = logging.getLogger(__name__)

BENIGN = "benign"
MALIGNANT = "malignant"
CLASS_CODES = {"B": BENIGN, "M": MALIGNANT}
MAGNIFICATIONS = (40, 100, 200, 400)
IMAGE_EXTENSIONS = (".png", ".tif", ".tiff")
MANIFEST_COLUMNS = ("path", "patient_id", "class", "subtype", "magnification", "sequence")

_NAME_RE = re.compile(
    r"^(?P<procedure>[A-Za-z]+)_(?P<cls>[A-Za-z])_(?P<subtype>[A-Za-z]+)"
    r"-(?P<year>\d+)-(?P<slide>[A-Za-z0-9]+)-(?P<mag>\d+)-(?P<seq>\d+)"
    r"\.(?P<ext>[A-Za-z]+)$"
)


@dataclass(frozen=True)
class SampleMeta:
    path: str
    patient_id: str
    class_label: str
    subtype: str
    magnification: int
    sequence: int

    @property
    def name(self) -> str:
        return os.path.basename(self.path)

    @property
    def sample_id(self) -> str:
        return os.path.splitext(self.name)[0]


def parse_filename(name: str, path: str | None = None) -> SampleMeta:
    """Parse a BreakHis file name into a :class:`SampleMeta`.

    Raises :class:`MalformedName` when the token layout, class code,
    magnification or extension is not recognised.
    """
    base = os.path.basename(name)
    m = _NAME_RE.match(base)
    if m is None:
        raise MalformedName(f"cannot parse BreakHis file name {base!r}")
    if "." + m["ext"].lower() not in IMAGE_EXTENSIONS:
        raise MalformedName(f"unsupported raster extension in {base!r}")
    cls = CLASS_CODES.get(m["cls"].upper())
    if cls is None:
        raise MalformedName(f"unknown class code {m['cls']!r} in {base!r}")
    mag = int(m["mag"])
    if mag not in MAGNIFICATIONS:
        raise MalformedName(f"magnification {mag} not in {MAGNIFICATIONS} ({base!r})")
    return SampleMeta(
        path=path if path is not None else name,
        patient_id=f"{m['procedure']}-{m['year']}-{m['slide']}",
        class_label=cls,
        subtype=m["subtype"],
        magnification=mag,
        sequence=int(m["seq"]),
    )


@dataclass
class Manifest:
    samples: list[SampleMeta]
    patients: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples: Iterable[SampleMeta]) -> "Manifest":
        samples = sorted(samples, key=lambda s: s.path)
        patients: dict[str, str] = {}
        for s in samples:
            seen = patients.setdefault(s.patient_id, s.class_label)
            if seen != s.class_label:
                raise ConflictingPatientClass(
                    f"patient {s.patient_id} appears as both {seen} and {s.class_label}"
                )
        return cls(samples=samples, patients=dict(sorted(patients.items())))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def patient_ids(self) -> list[str]:
        return list(self.patients)

    def counts(self) -> Counter:
        """Image counts keyed by ``(magnification, class_label)``."""
        return Counter((s.magnification, s.class_label) for s in self.samples)

    def patient_counts(self) -> Counter:
        return Counter(self.patients.values())

    def filter(self, magnification: int | None = None, patients: Iterable[str] | None = None) -> "Manifest":
        keep = set(patients) if patients is not None else None
        chosen = [
            s
            for s in self.samples
            if (magnification is None or s.magnification == magnification)
            and (keep is None or s.patient_id in keep)
        ]
        present = {s.patient_id for s in chosen}
        return Manifest(
            samples=chosen,
            patients={p: c for p, c in self.patients.items() if p in present},
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for s in self.samples:
            writer.writerow([s.path, s.patient_id, s.class_label, s.subtype, s.magnification, s.sequence])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Manifest":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != MANIFEST_COLUMNS:
            raise MalformedName(f"manifest header must be {','.join(MANIFEST_COLUMNS)}")
        samples = [
            SampleMeta(
                path=row["path"],
                patient_id=row["patient_id"],
                class_label=row["class"],
                subtype=row["subtype"],
                magnification=int(row["magnification"]),
                sequence=int(row["sequence"]),
            )
            for row in reader
        ]
        if not samples:
            raise EmptyDataset("manifest has no rows")
        return cls.from_samples(samples)


def _directory_label(path: Path) -> str | None:
    parts = {p.lower() for p in path.parent.parts}
    found = parts & {BENIGN, MALIGNANT}
    return found.pop() if len(found) == 1 else None


def build_manifest(root: str | os.PathLike) -> Manifest:
    """Index every recognised image below ``root``.

    Files with a raster extension whose names do not follow the BreakHis
    convention are skipped with a warning.  Samples are ordered
    lexicographically by path.
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f"dataset root {root} is not a directory")
    samples = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for fname in sorted(filenames):
            if not fname.lower().endswith(IMAGE_EXTENSIONS):
                continue
            path = Path(dirpath) / fname
            try:
                meta = parse_filename(fname, path=path.as_posix())
            except MalformedName:
                log.warning("skipping unrecognised image name %s", path)
                continue
            dir_label = _directory_label(path.relative_to(root))
            if dir_label is not None and dir_label != meta.class_label:
                raise ConflictingLabel(
                    f"{path}: file name says {meta.class_label}, directory says {dir_label}"
                )
            samples.append(meta)
    if not samples:
        raise EmptyDataset(f"no BreakHis images found under {root}")
    return Manifest.from_samples(samples)


def load_green_channel(path: str | os.PathLike, channel: str = "green") -> np.ndarray:
    """Load an 8-bit raster as a float64 ``(height, width)`` grid in [0, 1].

    ``channel`` selects the green channel (default) or ITU-R 601 luminance.
    Single-channel inputs are scaled by 1/255 and otherwise left alone.
    """
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("L", "I;16", "I", "F"):
                arr = np.asarray(im.convert("L") if im.mode != "L" else im, dtype=np.float64)
                return arr / 255.0
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc
    if channel == "green":
        gray = rgb[..., 1]
    elif channel == "luminance":
        gray = np.clip(rgb @ np.array([0.299, 0.587, 0.114]), 0.0, 255.0)
    else:
        raise ValueError(f"unknown channel {channel!r}")
    return gray / 255.0


@dataclass(frozen=True)
class SplitPlan:
    train_patients: frozenset[str]
    test_patients: frozenset[str]
    seed: int


def _shuffled_patients(patients: Sequence[str], seed: int) -> list[str]:
    ordered = sorted(patients)
    perm = np.random.default_rng(seed).permutation(len(ordered))
    return [ordered[i] for i in perm]


def patient_split(manifest: Manifest, train_fraction: float, seed: int) -> SplitPlan:
    """Seeded patient-wise train/test split.

    The train side receives ``floor(fraction * P + 0.5)`` patients, so 82
    patients at 0.7 give 57 train / 25 test.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    patients = manifest.patient_ids
    n_train = int(np.floor(train_fraction * len(patients) + 0.5))
    if n_train < 1 or n_train >= len(patients):
        raise TooFewPatients(
            f"{len(patients)} patients at fraction {train_fraction} leaves an empty side"
        )
    order = _shuffled_patients(patients, seed)
    return SplitPlan(frozenset(order[:n_train]), frozenset(order[n_train:]), seed)


def patient_folds(manifest: Manifest, k: int, seed: int) -> list[frozenset[str]]:
    """Partition patients into ``k`` disjoint folds whose sizes differ by at most one."""
    patients = manifest.patient_ids
    if k < 2 or k > len(patients):
        raise BadK(f"k={k} invalid for {len(patients)} patients")
    order = _shuffled_patients(patients, seed)
    return [frozenset(chunk) for chunk in np.array_split(np.array(order, dtype=object), k)]
