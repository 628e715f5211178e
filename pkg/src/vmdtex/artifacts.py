"""File formats: atomic writes, VMD component dumps and feature tables."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .vmd import DecompositionTree

FEATURE_META_COLUMNS = ("sample_id", "patient_id", "magnification", "label")


def atomic_write(path: str | os.PathLike, data: str | bytes) -> Path:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps_json(obj))


# -- VMD components --------------------------------------------------------

def dump_components(
    tree: DecompositionTree, out_dir: str | os.PathLike, stem: str, meta: dict | None = None
) -> list[Path]:
    """Write each component as little-endian float32 (row-major) plus a JSON sidecar.

    Files are named ``{stem}_L{level}_{low|high}.f32`` / ``.json``.  Entries
    of ``meta`` (e.g. the run seed) are copied into every sidecar.
    """
    out_dir = Path(out_dir)
    written = []
    for level_no, level in enumerate(tree.levels, start=1):
        residual = level.diagnostics.residual if level.diagnostics else 0.0
        for which, mode in (("low", level.low), ("high", level.high)):
            base = out_dir / f"{stem}_L{level_no}_{which}"
            raw = np.ascontiguousarray(mode.spatial, dtype="<f4").tobytes()
            height, width = mode.spatial.shape
            sidecar = {
                "width": width,
                "height": height,
                "level": level_no,
                "which": which,
                "center_frequency": [float(mode.center_frequency[0]), float(mode.center_frequency[1])],
                "residual": float(residual),
                "degenerate": bool(mode.degenerate),
                **(meta or {}),
            }
            written.append(atomic_write(base.with_suffix(".f32"), raw))
            written.append(write_json(base.with_suffix(".json"), sidecar))
    return written


def load_component(path_f32: str | os.PathLike) -> tuple[np.ndarray, dict]:
    path_f32 = Path(path_f32)
    meta = json.loads(path_f32.with_suffix(".json").read_text())
    data = np.frombuffer(path_f32.read_bytes(), dtype="<f4")
    return data.reshape(meta["height"], meta["width"]), meta


# -- feature tables --------------------------------------------------------

@dataclass
class FeatureTable:
    sample_ids: list[str]
    patient_ids: list[str]
    magnifications: list[int]
    labels: list[str]
    names: list[str]
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.sample_ids)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([*FEATURE_META_COLUMNS, *self.names])
        for i in range(len(self)):
            writer.writerow(
                [self.sample_ids[i], self.patient_ids[i], self.magnifications[i], self.labels[i]]
                + [f"{v:.9g}" for v in self.values[i]]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FeatureTable":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0][:4]) != FEATURE_META_COLUMNS:
            raise DataError(f"feature CSV must start with {','.join(FEATURE_META_COLUMNS)}")
        names = rows[0][4:]
        body = rows[1:]
        return cls(
            sample_ids=[r[0] for r in body],
            patient_ids=[r[1] for r in body],
            magnifications=[int(r[2]) for r in body],
            labels=[r[3] for r in body],
            names=names,
            values=np.array([[float(v) for v in r[4:]] for r in body], dtype=np.float64).reshape(len(body), len(names)),
        )
