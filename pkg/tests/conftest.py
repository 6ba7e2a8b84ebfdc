"""
tests/conftest.py
~~~~~~~~~~~~~~~~~
Global pytest fixtures.

`isolate_output_dir` points ``$SDEATTN_OUTPUT_DIR`` at a per-test temporary
directory so nothing is left behind under ``local_runs/``;
`clear_pool_cache` empties the sweep's per-process dataset cache so a test
never sees pools built under another test's configuration.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from sdeattn import sweep
from sdeattn.data import PeriodicSpec, TimeSeriesBatch, generate_periodic
from sdeattn.model import ModelConfig


@pytest.fixture(autouse=True)
def isolate_output_dir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    out = tmp_path / "runs"
    monkeypatch.setenv("SDEATTN_OUTPUT_DIR", str(out))
    monkeypatch.setenv("SDEATTN_WORKERS", "1")
    return out


@pytest.fixture(autouse=True)
def clear_pool_cache() -> None:
    sweep._POOLS.clear()
    yield
    sweep._POOLS.clear()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config() -> ModelConfig:
    """Small enough for finite-difference checks over the whole model."""
    return ModelConfig(latent_dim=3, sde_hidden=4, output_hidden=4, substeps=2, heads=1, seq_len=3)


@pytest.fixture
def tiny_batch(rng: np.random.Generator) -> TimeSeriesBatch:
    values = rng.normal(size=(3, 2, 1))
    mask = np.array([[[1.0], [1.0]], [[0.0], [1.0]], [[1.0], [0.0]]])
    return TimeSeriesBatch(values=values, timestamps=np.array([0.2, 0.5, 0.9]), mask=mask)


@pytest.fixture
def periodic_groups() -> list[TimeSeriesBatch]:
    return generate_periodic(PeriodicSpec(n_trajectories=12, n_points=10, grid_group=4, seed=3))
