"""Per-image decomposition and feature extraction with a content-addressed cache."""
from __future__ import annotations

import hashlib
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .artifacts import FeatureTable, atomic_write
from .config import PipelineConfig
from .dataset import Manifest, SampleMeta, load_green_channel
from .features import EntropyOrders, ZernikeSpec, extract_features, feature_names
from .vmd import VmdParams, iterative_vmd

log = logging.getLogger(__name__)

CACHE_VERSION = 1


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def settings_key(channel: str, levels: int, vmd: VmdParams, spec: ZernikeSpec, orders: EntropyOrders) -> str:
    payload = {
        "version": CACHE_VERSION,
        "channel": channel,
        "levels": levels,
        "vmd": asdict(vmd),
        "zernike": asdict(spec),
        "entropy": asdict(orders),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


class FeatureCache:
    """Write-once ``.npy`` store keyed by (file content hash, settings hash).

    Concurrent writers of the same key each write a private temp file and
    rename it into place; the entries are identical so the last rename wins
    harmlessly.
    """

    def __init__(self, root: str | os.PathLike | None):
        self.root = Path(root) if root is not None else None

    def _path(self, content: str, settings: str) -> Path:
        key = hashlib.sha256(f"{content}:{settings}".encode()).hexdigest()
        return self.root / key[:2] / f"{key}.npy"

    def get(self, content: str, settings: str) -> np.ndarray | None:
        if self.root is None:
            return None
        path = self._path(content, settings)
        if not path.exists():
            return None
        try:
            return np.load(path, allow_pickle=False)
        except (OSError, ValueError):
            log.warning("ignoring unreadable cache entry %s", path)
            return None

    def put(self, content: str, settings: str, values: np.ndarray) -> None:
        if self.root is None:
            return
        path = self._path(content, settings)
        if path.exists():
            return
        buf = io.BytesIO()
        np.save(buf, np.asarray(values, dtype=np.float64), allow_pickle=False)
        atomic_write(path, buf.getvalue())


def _settings(config: PipelineConfig):
    return (
        config.dataset.channel,
        config.vmd.levels,
        # the seed only matters for random initialisation; keep cache keys stable otherwise
        config.vmd.params(config.seed if config.vmd.init == "random" else 0),
        config.features.zernike(),
        config.features.entropy(),
    )


def sample_features(path: str, channel: str, levels: int, vmd: VmdParams, spec: ZernikeSpec, orders: EntropyOrders) -> np.ndarray:
    image = load_green_channel(path, channel)
    tree = iterative_vmd(image, levels, vmd)
    return extract_features(tree, spec, orders).values


def _worker(args) -> np.ndarray:
    path, cache_root, settings = args
    channel, levels, vmd, spec, orders = settings
    cache = FeatureCache(cache_root)
    content = file_digest(path)
    skey = settings_key(channel, levels, vmd, spec, orders)
    cached = cache.get(content, skey)
    if cached is not None:
        return cached
    values = sample_features(path, channel, levels, vmd, spec, orders)
    cache.put(content, skey, values)
    return values


def compute_features(
    manifest: Manifest,
    config: PipelineConfig,
    jobs: int | None = None,
    use_cache: bool = True,
) -> FeatureTable:
    """Decompose and describe every manifest sample, in manifest order.

    Results are identical for any worker count; the pool only changes wall time.
    """
    settings = _settings(config)
    cache_root = str(config.cache_path) if use_cache else None
    tasks = [(s.path, cache_root, settings) for s in manifest.samples]
    jobs = config.n_jobs if jobs is None else jobs
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_worker, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_worker(t) for t in tasks]
    names = feature_names(config.vmd.levels, config.features.zernike())
    return FeatureTable(
        sample_ids=[s.sample_id for s in manifest.samples],
        patient_ids=[s.patient_id for s in manifest.samples],
        magnifications=[s.magnification for s in manifest.samples],
        labels=[s.class_label for s in manifest.samples],
        names=names,
        values=np.vstack(rows) if rows else np.zeros((0, len(names))),
    )


def decompose_sample(sample: SampleMeta | str, config: PipelineConfig):
    path = sample.path if isinstance(sample, SampleMeta) else str(sample)
    image = load_green_channel(path, config.dataset.channel)
    _, levels, vmd, _, _ = _settings(config)
    return iterative_vmd(image, levels, vmd)
