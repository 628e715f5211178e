"""Pipeline configuration.

The configuration is a TOML file with optional sections ``[dataset]``,
``[vmd]``, ``[features]``, ``[selection]``, ``[classifier]`` and
``[experiment]`` plus a few top-level keys.  Unknown keys anywhere are
rejected.  See ``configs/`` in the repository for complete examples.
"""
from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .features import EntropyOrders, ZernikeSpec
from .vmd import VmdParams

MAGNIFICATION_CHOICES = ("all", "full", 40, 100, 200, 400)


@dataclass
class DatasetConfig:
    root: str | None = None
    channel: str = "green"
    magnification: Any = "all"
    synthetic: bool = False
    synthetic_patients_per_class: int = 10
    synthetic_images_per_patient: int = 5
    synthetic_size: list[int] = field(default_factory=lambda: [96, 96])

    def validate(self):
        if self.channel not in ("green", "luminance"):
            raise ConfigError(f"dataset.channel must be 'green' or 'luminance', got {self.channel!r}")
        self.magnification = parse_magnification(self.magnification)
        if not self.synthetic and not self.root:
            raise ConfigError("dataset.root is required unless dataset.synthetic = true")
        if len(self.synthetic_size) != 2 or min(self.synthetic_size) < 8:
            raise ConfigError("dataset.synthetic_size must be [height, width] with sides >= 8")


@dataclass
class VmdConfig:
    levels: int = 5
    alpha: float = 5000.0
    tau: float = 0.0
    epsilon: float = 1e-6
    max_iterations: int = 300
    init: str = "fixed"

    def validate(self):
        if self.levels < 1:
            raise ConfigError(f"vmd.levels must be >= 1, got {self.levels}")
        self.params(0)

    def params(self, seed: int) -> VmdParams:
        return VmdParams(
            modes_K=2,
            alpha=float(self.alpha),
            tau=float(self.tau),
            epsilon=float(self.epsilon),
            max_iterations=int(self.max_iterations),
            init=self.init,
            seed=seed,
        )


@dataclass
class FeaturesConfig:
    zernike_order: int = 10
    grid_side: int = 128
    renyi_order: float = 2.0
    kapur_a: float = 0.5
    kapur_b: float = 2.0
    yager_denominator: str = "bins"

    def validate(self):
        if self.grid_side < 8:
            raise ConfigError("features.grid_side must be >= 8 for box counting")
        if self.yager_denominator not in ("bins", "pixels"):
            raise ConfigError("features.yager_denominator must be 'bins' or 'pixels'")
        if self.renyi_order <= 0 or self.renyi_order == 1:
            raise ConfigError("features.renyi_order must be positive and != 1")
        if self.kapur_a <= 0 or self.kapur_b <= 0 or self.kapur_a == self.kapur_b:
            raise ConfigError("features.kapur_a/kapur_b must be positive and distinct")
        self.zernike()

    def zernike(self) -> ZernikeSpec:
        return ZernikeSpec(int(self.zernike_order), int(self.grid_side))

    def entropy(self) -> EntropyOrders:
        return EntropyOrders(float(self.renyi_order), float(self.kapur_a), float(self.kapur_b), self.yager_denominator)


@dataclass
class SelectionConfig:
    k_neighbors: int = 10
    p_threshold: float = 0.05
    fallback_top: int = 25

    def validate(self):
        if self.k_neighbors < 1:
            raise ConfigError("selection.k_neighbors must be >= 1")
        if not 0 < self.p_threshold <= 1:
            raise ConfigError("selection.p_threshold must lie in (0, 1]")
        if self.fallback_top < 1:
            raise ConfigError("selection.fallback_top must be >= 1")


@dataclass
class ClassifierConfig:
    gamma_grid: list[float] = field(default_factory=lambda: [0.1, 1.0, 10.0, 100.0, 1000.0])
    sigma_grid: list[float] = field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
    inner_folds: int = 5

    def validate(self):
        if not self.gamma_grid or not self.sigma_grid:
            raise ConfigError("classifier grids must be non-empty")
        if min(self.gamma_grid) <= 0 or min(self.sigma_grid) <= 0:
            raise ConfigError("classifier grid values must be positive")
        if self.inner_folds < 2:
            raise ConfigError("classifier.inner_folds must be >= 2")


@dataclass
class ExperimentConfig:
    mode: str = "kfold"
    k: int = 3
    repeats: int = 5
    train_fraction: float = 0.7

    def validate(self):
        if self.mode not in ("kfold", "holdout"):
            raise ConfigError(f"experiment.mode must be 'kfold' or 'holdout', got {self.mode!r}")
        if self.k < 2:
            raise ConfigError("experiment.k must be >= 2")
        if self.repeats < 1:
            raise ConfigError("experiment.repeats must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("experiment.train_fraction must lie in (0, 1)")


@dataclass
class PipelineConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    vmd: VmdConfig = field(default_factory=VmdConfig)
    features: FeaturesConfig = field(default_factory=FeaturesConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    seed: int = 0
    cache_dir: str | None = None
    output_dir: str = "out"
    jobs: int = 0

    def validate(self) -> "PipelineConfig":
        for section in _SECTIONS:
            getattr(self, section).validate()
        if self.jobs < 0:
            raise ConfigError("jobs must be >= 0 (0 = all cores)")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    @property
    def cache_path(self) -> Path:
        return Path(self.cache_dir) if self.cache_dir else self.output_path / "cache"

    @property
    def n_jobs(self) -> int:
        return self.jobs or (os.cpu_count() or 1)

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | os.PathLike | None = None) -> "PipelineConfig":
        data = dict(data)
        kwargs: dict[str, Any] = {}
        for name, section_cls in _SECTIONS.items():
            if name in data:
                kwargs[name] = _build(section_cls, data.pop(name), name)
        top = {f.name for f in dataclasses.fields(cls)} - set(_SECTIONS)
        unknown = set(data) - top
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs.update(data)
        cfg = cls(**kwargs)
        if base_dir is not None:
            cfg._resolve_paths(Path(base_dir))
        return cfg.validate()

    def _resolve_paths(self, base: Path):
        def fix(p):
            return p if p is None or os.path.isabs(p) else str(base / p)

        self.dataset.root = fix(self.dataset.root)
        self.cache_dir = fix(self.cache_dir)
        self.output_dir = fix(self.output_dir)


_SECTIONS = {
    "dataset": DatasetConfig,
    "vmd": VmdConfig,
    "features": FeaturesConfig,
    "selection": SelectionConfig,
    "classifier": ClassifierConfig,
    "experiment": ExperimentConfig,
}


def _build(section_cls, values, name):
    if not isinstance(values, dict):
        raise ConfigError(f"[{name}] must be a table")
    allowed = {f.name for f in dataclasses.fields(section_cls)}
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {', '.join(sorted(unknown))}")
    return section_cls(**values)


def parse_magnification(value) -> str | int:
    if isinstance(value, str) and value.lower().rstrip("x").isdigit():
        value = int(value.lower().rstrip("x"))
    if isinstance(value, str):
        value = value.lower()
    if value not in MAGNIFICATION_CHOICES:
        raise ConfigError(f"magnification must be one of {MAGNIFICATION_CHOICES}, got {value!r}")
    return value


def load_config(path: str | os.PathLike) -> PipelineConfig:
    """Read and validate a TOML config; relative paths resolve against its directory."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    try:
        return PipelineConfig.from_dict(data, base_dir=path.parent)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
