"""
datasets.py
~~~~~~~~~~~
Resolve a dataset name into train / test pools.

Names
-----
``periodic``   generated noisy periodic trajectories (interpolation)
``frequency``  generated two-class frequency discrimination (classification)
anything else  path to a repository-format ``.ts`` or fallback ``.csv``
               train file; the test split is its ``*_TEST`` sibling

A pool is a list of :class:`TimeSeriesBatch` groups sharing one time grid
each.  Generated periodic data is cached as ``.npz`` under
``DataConfig.cache_dir`` when one is set.
"""

from __future__ import annotations

import json
import logging
import math
import zlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np

from .data import (
    PeriodicSpec,
    TimeSeriesBatch,
    generate_frequency_classes,
    generate_periodic,
    load_cached,
    save_cached,
    split_groups,
)
from .errors import ConfigError
from .ucr_loader import load_dataset

LOG = logging.getLogger("datasets")

GENERATED = ("periodic", "frequency")


@dataclass(frozen=True)
class DataConfig:
    # periodic
    n_trajectories: int = 1000
    n_points: int = 100
    amplitude_range: tuple[float, float] = (0.5, 1.5)
    frequency_range: tuple[float, float] = (0.8, 1.2)
    offset_range: tuple[float, float] = (-0.5, 0.5)
    theta: float = 2.0
    mu: float = 0.0
    sigma: float = 0.2
    grid_group: int = 32
    test_fraction: float = 0.2
    # frequency
    n_train: int = 400
    n_test: int = 200
    class_frequencies: tuple[float, ...] = (1.0, 1.3)
    class_points: int = 50
    class_noise: float = 0.0
    # files
    format: str = "auto"
    dims: int = 1
    normalize: bool = True
    # shared
    data_seed: int = 0
    cache_dir: str = ""

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        if self.format not in ("auto", "ts", "csv"):
            raise ConfigError(f"format must be auto, ts or csv, got {self.format!r}")

    def periodic_spec(self) -> PeriodicSpec:
        return PeriodicSpec(
            n_trajectories=self.n_trajectories,
            n_points=self.n_points,
            amplitude_range=tuple(self.amplitude_range),
            frequency_range=tuple(self.frequency_range),
            offset_range=tuple(self.offset_range),
            theta=self.theta,
            mu=self.mu,
            sigma=self.sigma,
            grid_group=self.grid_group,
            seed=self.data_seed,
        )

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DatasetPools:
    name: str
    train: list[TimeSeriesBatch]
    test: list[TimeSeriesBatch]
    n_classes: int = 0

    @property
    def input_dim(self) -> int:
        return self.train[0].dims

    @property
    def seq_len(self) -> int:
        return max(b.length for b in self.train + self.test)

    @property
    def task(self) -> str:
        return "classification" if self.n_classes > 0 else "interpolation"


def _spec_key(spec: dict[str, Any]) -> str:
    return f"{zlib.crc32(json.dumps(spec, sort_keys=True).encode()):08x}"


def periodic_groups(cfg: DataConfig) -> list[TimeSeriesBatch]:
    """Generate (or reload from the cache) every periodic grid group."""
    spec = cfg.periodic_spec()
    spec_dict = {"dataset": "periodic", **asdict(spec)}
    if not cfg.cache_dir:
        return generate_periodic(spec)
    path = Path(cfg.cache_dir) / f"periodic-{_spec_key(spec_dict)}.npz"
    cached = load_cached(path)
    if cached is not None:
        batches, stored = cached
        if json.dumps(stored, sort_keys=True) == json.dumps(spec_dict, sort_keys=True):
            LOG.info("[cache] periodic data ← %s", path)
            return batches
        LOG.warning("[cache] %s was built from another spec; regenerating", path)
    batches = generate_periodic(spec)
    save_cached(path, batches, spec_dict)
    return batches


def _split_rows(batch: TimeSeriesBatch, test_fraction: float) -> tuple[TimeSeriesBatch, TimeSeriesBatch]:
    if batch.size < 2:
        raise ConfigError(f"cannot split {batch.size} series into train and test")
    n_test = min(batch.size - 1, max(1, math.ceil(test_fraction * batch.size)))
    cut = batch.size - n_test
    return batch.select(np.arange(cut)), batch.select(np.arange(cut, batch.size))


def load_pools(name: str, cfg: DataConfig | None = None) -> DatasetPools:
    """
    Resolve *name* to pools.

    Raises:
        ConfigError: unknown name that is not an existing file either.
        DataFormatError: the file exists but does not parse.
    """
    cfg = cfg or DataConfig()
    if name == "periodic":
        train, test = split_groups(periodic_groups(cfg), cfg.test_fraction)
        return DatasetPools(name, train, test)
    if name == "frequency":
        common = dict(
            n_points=cfg.class_points,
            frequencies=cfg.class_frequencies,
            seed=cfg.data_seed,
            noise=cfg.class_noise,
        )
        train = generate_frequency_classes(cfg.n_train, split="train", **common)
        test = generate_frequency_classes(cfg.n_test, split="test", **common)
        return DatasetPools(name, [train], [test], n_classes=len(cfg.class_frequencies))

    path = Path(name)
    if not path.exists():
        raise ConfigError(f"unknown dataset {name!r}: not one of {GENERATED} and no such file")
    train, test = load_dataset(path, fmt=cfg.format, dims=cfg.dims, normalize=cfg.normalize)
    if test is None:
        LOG.warning(
            "no test split next to %s; holding out the trailing %.0f%% of rows", path, 100 * cfg.test_fraction
        )
        train, test = _split_rows(train, cfg.test_fraction)
    n_classes = len(train.meta.get("class_names") or []) or int(train.labels.max()) + 1
    return DatasetPools(dataset_label(name), [train], [test], n_classes)


def dataset_label(name: str) -> str:
    """Short name used in result rows and file names."""
    if name in GENERATED:
        return name
    return Path(name).stem.removesuffix("_TRAIN").removesuffix("_train")


__all__ = ["DataConfig", "DatasetPools", "GENERATED", "periodic_groups", "load_pools", "dataset_label"]
