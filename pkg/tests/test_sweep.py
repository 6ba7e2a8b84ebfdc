"""
tests/test_sweep.py
~~~~~~~~~~~~~~~~~~~
Cell grid, failure records, byte-identical reruns and resume.
"""

from __future__ import annotations

import math
from pathlib import Path

import pytest

from sdeattn import sweep
from sdeattn.config import CONFIG_ECHO, load_config
from sdeattn.errors import TrainingAborted
from sdeattn.results_store import RESULTS_FILE, TIMINGS_FILE
from sdeattn.sweep import Cell, cells, run_sweep
from sdeattn.training import TrainRun

TINY = {
    "experiment.name": "tiny",
    "experiment.task": "classification",
    "experiment.datasets": "frequency",
    "sweep.variants": "sde-rnn, sde-scha",
    "sweep.missing_rates": "0.0, 0.5",
    "sweep.seeds": "0",
    "data.n_train": "6",
    "data.n_test": "4",
    "data.class_points": "5",
    "model.latent_dim": "3",
    "model.sde_hidden": "4",
    "model.output_hidden": "4",
    "model.substeps": "1",
    "model.heads": "1",
    "train.iterations": "2",
    "train.batch_size": "3",
    "train.log_every": "0",
}


@pytest.fixture
def tiny_cfg():
    return load_config(overrides=TINY)


def test_cell_grid_and_ids(tiny_cfg):
    grid = cells(tiny_cfg)

    assert len(grid) == 4
    assert grid[0] == Cell("frequency", "sde-rnn", 0.0, 0)
    assert grid[0].id == "frequency__sde-rnn__r0.0000__s0"
    assert Cell("data/ECG_TRAIN.ts", "sde-pyr", 0.3, 2).label == "cell ECG/sde-pyr r0.30 s2"
    assert len({c.id for c in grid}) == len(grid)


def test_cell_model_config_fills_derived_fields(tiny_cfg):
    pools = sweep._pools("frequency", tiny_cfg.data)
    model = sweep.cell_model_config(tiny_cfg, Cell("frequency", "sde-scha", 0.0, 4), pools)

    assert model.attention == "static-channel"
    assert model.n_classes == 2
    assert model.seq_len == 5
    assert model.seed == 4
    assert model.latent_dim == 3


def test_sweep_writes_every_artefact(tiny_cfg, tmp_path: Path):
    out = tmp_path / "sweep"
    report = run_sweep(tiny_cfg, out)

    assert len(report) == 4
    assert all(r.ok for r in report.rows)
    assert all(0.0 <= r.metric <= 1.0 for r in report.rows)
    for name in (CONFIG_ECHO, RESULTS_FILE, TIMINGS_FILE):
        assert (out / name).exists()
    assert len(list((out / "cells").glob("*.json"))) == 4
    assert len(list((out / "logs").glob("*.jsonl"))) == 4
    assert len(list((out / "checkpoints").glob("*.npz"))) == 4


def test_reruns_are_byte_identical(tiny_cfg, tmp_path: Path):
    run_sweep(tiny_cfg, tmp_path / "a")
    run_sweep(tiny_cfg, tmp_path / "b")
    assert (tmp_path / "a" / RESULTS_FILE).read_bytes() == (tmp_path / "b" / RESULTS_FILE).read_bytes()


def test_interrupted_sweep_resumes(tiny_cfg, tmp_path: Path):
    run_sweep(tiny_cfg, tmp_path / "full")

    seen = []
    partial = run_sweep(tiny_cfg, tmp_path / "resumed", max_cells=1, on_cell=seen.append)
    assert len(partial) == 1 and len(seen) == 1
    assert (tmp_path / "resumed" / RESULTS_FILE).exists()

    seen.clear()
    run_sweep(tiny_cfg, tmp_path / "resumed", on_cell=seen.append)
    assert len(seen) == 3
    full, resumed = (tmp_path / d / RESULTS_FILE for d in ("full", "resumed"))
    assert full.read_bytes() == resumed.read_bytes()


def test_completed_sweep_runs_nothing(tiny_cfg, tmp_path: Path):
    run_sweep(tiny_cfg, tmp_path)
    seen = []
    report = run_sweep(tiny_cfg, tmp_path, on_cell=seen.append)
    assert seen == []
    assert len(report) == 4


def test_failing_cell_is_recorded_and_sweep_continues(tiny_cfg, tmp_path: Path, monkeypatch, caplog):
    real_train = sweep.train

    def flaky(model_cfg, pool, run_cfg, **kwargs):
        if model_cfg.attention == "static-channel":
            run = TrainRun(seed=run_cfg.seed, iterations=2, batch_size=3, losses=[0.7], wall_ms=3.0)
            raise TrainingAborted("iteration 1: no valid rows", run=run)
        return real_train(model_cfg, pool, run_cfg, **kwargs)

    monkeypatch.setattr(sweep, "train", flaky)
    with caplog.at_level("WARNING", logger="sweep"):
        report = run_sweep(tiny_cfg, tmp_path)

    failed = [r for r in report.rows if r.error]
    assert len(failed) == 2
    assert all(r.variant == "sde-scha" for r in failed)
    assert all(math.isnan(r.metric) for r in failed)
    assert failed[0].error.startswith("TrainingAborted: iteration 1")
    assert sum(r.ok for r in report.rows) == 2
    assert "failed" in caplog.text

    record = sweep.ResultsStore(tmp_path).load_cells()[Cell("frequency", "sde-scha", 0.0, 0).id]
    assert record["iterations"] == 1


def test_unknown_dataset_becomes_error_rows(tiny_cfg, tmp_path: Path):
    cfg = load_config(overrides={**TINY, "experiment.datasets": "nowhere.ts", "sweep.variants": "sde-rnn"})
    report = run_sweep(cfg, tmp_path, workers=1)

    assert len(report) == 2
    assert all(r.error.startswith("ConfigError") for r in report.rows)
    assert {r.dataset for r in report.rows} == {"nowhere"}
