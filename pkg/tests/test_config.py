"""
tests/test_config.py
~~~~~~~~~~~~~~~~~~~~
INI experiment files, overrides, the environment and the config echo.
"""

from __future__ import annotations

import textwrap
from pathlib import Path

import pytest

from sdeattn.config import CONFIG_ECHO, ExperimentConfig, echo_config, env_workers, load_config
from sdeattn.errors import ConfigError


def _ini(tmp_path: Path, body: str) -> Path:
    path = tmp_path / "exp.ini"
    path.write_text(textwrap.dedent(body), encoding="utf-8")
    return path


EXAMPLE = """
    [experiment]
    name = periodic-desk
    task = interpolation
    datasets = periodic

    [sweep]
    variants = sde-rnn, sde-tvf-l
    observed_rates = 0.1, 0.3
    seeds = 0, 1
    save_checkpoints = no

    [data]
    n_trajectories = 64
    amplitude_range = 0.25, 2.0

    [model]
    substeps = 3
    feed_mask = false

    [train]
    iterations = 12
    lr = 0.005
"""


def test_defaults_follow_environment(isolate_output_dir: Path, monkeypatch):
    monkeypatch.setenv("SDEATTN_WORKERS", "3")
    cfg = load_config()

    assert cfg.output_dir == str(isolate_output_dir)
    assert cfg.workers == 3
    assert cfg.task == "classification"
    assert cfg.rates == cfg.missing_rates


def test_file_values_are_typed(tmp_path: Path):
    cfg = load_config(_ini(tmp_path, EXAMPLE))

    assert cfg.name == "periodic-desk"
    assert cfg.datasets == ("periodic",)
    assert cfg.variants == ("sde-rnn", "sde-tvf-l")
    assert cfg.rates == (0.1, 0.3)
    assert cfg.seeds == (0, 1)
    assert cfg.save_checkpoints is False
    assert cfg.data.n_trajectories == 64
    assert cfg.data.amplitude_range == (0.25, 2.0)
    assert cfg.model.substeps == 3
    assert cfg.model.feed_mask is False
    assert cfg.run.iterations == 12
    assert cfg.run.lr == 0.005


def test_overrides_beat_the_file(tmp_path: Path):
    cfg = load_config(_ini(tmp_path, EXAMPLE), {"train.iterations": "5", "sweep.seeds": "7"})
    assert cfg.run.iterations == 5
    assert cfg.seeds == (7,)


def test_run_config_per_cell(tmp_path: Path):
    cfg = load_config(_ini(tmp_path, EXAMPLE))
    run = cfg.run_config(0.3, 1)

    assert run.task == "interpolation"
    assert run.observed_rate == 0.3 and run.missing_rate == 0.0
    assert run.seed == 1
    assert run.iterations == 12


@pytest.mark.parametrize(
    "body",
    [
        "[extras]\nx = 1\n",
        "[experiment]\ncolour = red\n",
        "[sweep]\nname = x\n",
        "[model]\nattention = pyramidal\n",
        "[train]\nseed = 3\n",
        "[train]\niterations = many\n",
        "[sweep]\nsave_checkpoints = perhaps\n",
        "[sweep]\nvariants = sde-lstm\n",
        "[experiment]\ntask = forecasting\n",
        "[sweep]\nmissing_rates = 1.5\n",
        "[data]\nformat = arff\n",
    ],
)
def test_bad_files_raise_config_error(tmp_path: Path, body: str):
    with pytest.raises(ConfigError):
        load_config(_ini(tmp_path, body))


def test_missing_file(tmp_path: Path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_malformed_override():
    with pytest.raises(ConfigError):
        load_config(overrides={"iterations": "3"})


def test_bad_worker_env(monkeypatch):
    monkeypatch.setenv("SDEATTN_WORKERS", "lots")
    with pytest.raises(ConfigError):
        env_workers()


def test_echo_round_trip(tmp_path: Path):
    cfg = load_config(_ini(tmp_path, EXAMPLE))
    path = echo_config(cfg, tmp_path / "out")

    assert path.name == CONFIG_ECHO
    assert load_config(path) == cfg


def test_echo_of_defaults_round_trips(tmp_path: Path):
    cfg = ExperimentConfig(output_dir=str(tmp_path / "o"))
    assert load_config(echo_config(cfg, tmp_path / "o")) == cfg


@pytest.mark.parametrize("path", sorted((Path(__file__).parents[1] / "experiments").glob("*.ini")), ids=str)
def test_bundled_experiments_load(path: Path):
    cfg = load_config(path)
    assert cfg.name == path.stem
    assert cfg.rates
