"""
tests/test_training.py
~~~~~~~~~~~~~~~~~~~~~~
Seeded training loop, evaluation and checkpoint files on desk-sized pools.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from sdeattn import training
from sdeattn.checkpoint import Checkpoint
from sdeattn.data import generate_frequency_classes
from sdeattn.errors import ConfigError, DataFormatError, LossError, TrainingAborted
from sdeattn.run_logging import read_run_log
from sdeattn.training import RunConfig, evaluate, evaluate_checkpoint, make_view, train


@pytest.fixture
def class_pool():
    return [generate_frequency_classes(8, n_points=6, seed=0)]


@pytest.fixture
def class_model(tiny_config):
    return replace(tiny_config, n_classes=2, seq_len=6)


@pytest.fixture
def class_run():
    return RunConfig(task="classification", iterations=3, batch_size=4, lr=0.05, log_every=0, seed=1)


# ── RunConfig ─────────────────────────────────────────────────────────────
@pytest.mark.parametrize(
    "kwargs",
    [{"task": "forecast"}, {"batch_size": 0}, {"missing_rate": 1.5}, {"observed_rate": 0.0}, {"epochs": -1}],
)
def test_run_config_validation(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(**kwargs)


def test_rate_follows_task():
    assert RunConfig(task="classification", missing_rate=0.3).rate == 0.3
    assert RunConfig(task="interpolation", observed_rate=0.2).rate == 0.2


def test_epochs_override_iterations():
    assert RunConfig(iterations=7, batch_size=4, epochs=2).total_iterations(10) == 6
    assert RunConfig(iterations=7).total_iterations(10) == 7


# ── Views ─────────────────────────────────────────────────────────────────
def test_views_are_fixed_per_split_and_group(periodic_groups):
    cfg = RunConfig(task="interpolation", observed_rate=0.3, missing_rate=0.2, seed=5)
    batch = periodic_groups[0]
    a, target = make_view(batch, cfg, "train", 0)
    b, _ = make_view(batch, cfg, "train", 0)
    c, _ = make_view(batch, cfg, "test", 0)
    d, _ = make_view(batch, cfg, "train", 0, iteration=3)

    assert target is batch
    np.testing.assert_array_equal(a.mask, b.mask)
    assert not np.array_equal(a.mask, c.mask)
    assert not np.array_equal(a.mask, d.mask)
    assert np.all(a.mask[0] == 1.0)


def test_classification_view_only_masks(class_pool):
    cfg = RunConfig(missing_rate=0.5, seed=0)
    cond, target = make_view(class_pool[0], cfg, "train", 0)
    assert target is class_pool[0]
    assert cond.observed_fraction() < 1.0


# ── Training ──────────────────────────────────────────────────────────────
def test_train_is_deterministic(class_model, class_pool, class_run):
    ckpt_a, run_a = train(class_model, class_pool, class_run)
    ckpt_b, run_b = train(class_model, class_pool, class_run)

    assert run_a.losses == run_b.losses
    assert run_a.completed == 3
    for name, arr in ckpt_a.state.items():
        assert arr.tobytes() == ckpt_b.state[name].tobytes()


def test_train_seed_changes_initialisation(class_model, class_pool, class_run):
    _, run_a = train(class_model, class_pool, class_run)
    _, run_b = train(class_model, class_pool, replace(class_run, seed=2))
    assert run_a.losses != run_b.losses


def test_checkpoint_config_carries_run_seed(class_model, class_pool, class_run):
    ckpt, _ = train(class_model, class_pool, class_run)
    assert ckpt.config.seed == class_run.seed


def test_training_reduces_interpolation_loss(tiny_config, periodic_groups):
    cfg = RunConfig(
        task="interpolation", observed_rate=0.5, iterations=40, batch_size=4, lr=0.05, log_every=0
    )
    _, run = train(tiny_config, periodic_groups, cfg)

    assert all(np.isfinite(run.losses))
    assert np.mean(run.losses[-10:]) < np.mean(run.losses[:10])


def test_run_log_has_one_record_per_iteration(class_model, class_pool, class_run, tmp_path: Path):
    log_path = tmp_path / "logs" / "run.jsonl"
    _, run = train(class_model, class_pool, class_run, log_path=log_path)
    records = read_run_log(log_path)

    assert [r["iteration"] for r in records] == [0, 1, 2]
    assert [r["loss"] for r in records] == run.losses
    assert all(r["grad_norm"] > 0 for r in records)


def test_empty_pool_rejected(class_model, class_run):
    with pytest.raises(ConfigError):
        train(class_model, [], class_run)


def test_loss_failure_aborts_with_partial_run(class_model, class_pool, class_run, monkeypatch):
    def no_rows(*args, **kwargs):
        raise LossError("no valid rows for cross-entropy")

    monkeypatch.setattr(training, "objective", no_rows)
    with pytest.raises(TrainingAborted) as info:
        train(class_model, class_pool, class_run)

    assert info.value.run.completed == 0
    assert info.value.run.seed == class_run.seed
    assert "iteration 0" in str(info.value)


# ── Evaluation ────────────────────────────────────────────────────────────
def test_classification_accuracy_in_unit_interval(class_model, class_pool, class_run):
    ckpt, _ = train(class_model, class_pool, class_run)
    res = evaluate_checkpoint(ckpt, class_pool, class_run)

    assert 0.0 <= res.metric <= 1.0
    assert res.count == 8
    assert res.eval_batch_size == 0


def test_chunking_does_not_change_independent_rows(tiny_config, periodic_groups):
    cfg = RunConfig(task="interpolation", observed_rate=0.4, iterations=2, batch_size=4, log_every=0)
    ckpt, _ = train(tiny_config, periodic_groups, cfg)

    whole = evaluate_checkpoint(ckpt, periodic_groups, cfg).metric
    chunked = evaluate_checkpoint(ckpt, periodic_groups, replace(cfg, eval_batch_size=1)).metric
    assert chunked == pytest.approx(whole, rel=1e-9)


def test_evaluate_keys_rows_by_seed(class_model, class_pool, class_run):
    ckpts = {s: train(class_model, class_pool, replace(class_run, seed=s))[0] for s in (0, 1)}
    report = evaluate(ckpts, class_pool, "classification", class_run, dataset="frequency", variant="sde-rnn")

    assert [r.seed for r in report.rows] == [0, 1]
    assert {r.variant for r in report.rows} == {"sde-rnn"}
    assert report.task == "classification"


def test_evaluate_single_checkpoint_uses_attention_name(class_model, class_pool, class_run):
    ckpt, _ = train(class_model, class_pool, class_run)
    report = evaluate(ckpt, class_pool, "classification")
    assert report.rows[0].variant == "none"
    assert report.rows[0].seed == class_run.seed


def test_empty_evaluation_raises(class_model, class_pool, class_run):
    ckpt, _ = train(class_model, class_pool, class_run)
    with pytest.raises(LossError):
        evaluate_checkpoint(ckpt, [], class_run)


# ── Checkpoint files ──────────────────────────────────────────────────────
def test_checkpoint_round_trip(class_model, class_pool, class_run, tmp_path: Path):
    ckpt, _ = train(class_model, class_pool, class_run)
    loaded = Checkpoint.load(ckpt.save(tmp_path / "ck" / "model.npz"))

    assert loaded.config == ckpt.config
    assert set(loaded.state) == set(ckpt.state)
    a = evaluate_checkpoint(ckpt, class_pool, class_run).metric
    b = evaluate_checkpoint(loaded, class_pool, class_run).metric
    assert a == b


def test_loading_garbage_checkpoint(tmp_path: Path):
    path = tmp_path / "bad.npz"
    np.savez(path, weights=np.zeros(3))
    with pytest.raises(DataFormatError):
        Checkpoint.load(path)
