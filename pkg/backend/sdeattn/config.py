"""
config.py
~~~~~~~~~
Experiment configuration: environment variables plus INI experiment files.

Environment (read after ``load_dotenv()``)
------------------------------------------
LOG_LEVEL            logging level for ``setup_logging`` (default ``info``)
SDEATTN_DEBUG        ``1`` turns on per-op finiteness checks in ``tensor``
SDEATTN_WORKERS      sweep worker processes (default 1)
SDEATTN_OUTPUT_DIR   default output directory (default ``runs``)

Experiment file
---------------
::

    [experiment]
    name = periodic-desk
    task = interpolation
    datasets = periodic
    output_dir = runs/periodic-desk

    [sweep]
    variants = sde-rnn, sde-tvf-l
    observed_rates = 0.1, 0.3
    seeds = 0, 1, 2

    [data]
    n_trajectories = 200

    [model]
    substeps = 5

    [train]
    iterations = 300

Precedence: built-in defaults < file < ``--set section.key=value``
overrides.  Unknown sections or keys raise :class:`ConfigError`.
``echo_config`` writes every resolved value, defaults included, so the
output directory describes its own run.
"""

from __future__ import annotations

import configparser
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Final, Mapping

from .constants import MISSING_RATES, OBSERVED_RATES, SEEDS, VARIANTS
from .datasets import DataConfig
from .errors import ConfigError
from .model import ModelConfig
from .training import TASKS, RunConfig

LOG = logging.getLogger("config")

CONFIG_ECHO: Final = "config.ini"

# Fields resolved per sweep cell, never read from a file.
MODEL_DERIVED: Final = frozenset({"input_dim", "seq_len", "n_classes", "attention", "seed"})
RUN_DERIVED: Final = frozenset({"task", "missing_rate", "observed_rate", "seed"})


# ── Environment ───────────────────────────────────────────────────────────
def env_workers() -> int:
    raw = os.getenv("SDEATTN_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"SDEATTN_WORKERS must be an integer, got {raw!r}") from None


def env_output_dir() -> str:
    return os.getenv("SDEATTN_OUTPUT_DIR", "runs")


# ── Experiment ────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    task: str = "classification"
    datasets: tuple[str, ...] = ("frequency",)
    variants: tuple[str, ...] = tuple(VARIANTS)
    missing_rates: tuple[float, ...] = MISSING_RATES
    observed_rates: tuple[float, ...] = OBSERVED_RATES
    seeds: tuple[int, ...] = SEEDS
    output_dir: str = "runs"
    workers: int = 1
    save_checkpoints: bool = True
    model: ModelConfig = field(default_factory=ModelConfig)
    run: RunConfig = field(default_factory=RunConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if not self.datasets:
            raise ConfigError("at least one dataset is required")
        unknown = [v for v in self.variants if v not in VARIANTS]
        if unknown or not self.variants:
            raise ConfigError(f"unknown model variants {unknown}; choose from {sorted(VARIANTS)}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if any(not 0.0 <= r <= 1.0 for r in self.missing_rates):
            raise ConfigError(f"missing rates must lie in [0, 1]: {self.missing_rates}")
        if any(not 0.0 < r <= 1.0 for r in self.observed_rates):
            raise ConfigError(f"observed rates must lie in (0, 1]: {self.observed_rates}")
        if not self.rates:
            raise ConfigError(f"no rates to sweep for task {self.task!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @property
    def rates(self) -> tuple[float, ...]:
        return self.observed_rates if self.task == "interpolation" else self.missing_rates

    def run_config(self, rate: float, seed: int) -> RunConfig:
        """The per-cell :class:`RunConfig` for one swept rate and seed."""
        if self.task == "interpolation":
            return replace(self.run, task=self.task, observed_rate=rate, missing_rate=0.0, seed=seed)
        return replace(self.run, task=self.task, missing_rate=rate, observed_rate=1.0, seed=seed)


# ── INI coercion ──────────────────────────────────────────────────────────
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(raw: str, default: Any, key: str) -> Any:
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in _TRUE | _FALSE:
                raise ValueError(f"not a boolean: {raw!r}")
            return low in _TRUE
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            sample = default[0] if default else ""
            if isinstance(sample, (int, float)) and not isinstance(sample, bool):
                return tuple(type(sample)(s) for s in items)
            return tuple(items)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    return raw


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _apply(obj: Any, section: str, values: Mapping[str, str], skip: frozenset[str] = frozenset()) -> Any:
    allowed = {f.name for f in fields(obj) if f.name not in skip and f.name not in ("model", "run", "data")}
    updates = {}
    for key, raw in values.items():
        if key not in allowed:
            raise ConfigError(f"unknown key [{section}] {key}")
        updates[key] = _coerce(raw, getattr(obj, key), f"[{section}] {key}")
    return replace(obj, **updates) if updates else obj


_EXPERIMENT_KEYS: Final = frozenset({"name", "task", "datasets", "output_dir"})
_SWEEP_KEYS: Final = frozenset(
    {"variants", "missing_rates", "observed_rates", "seeds", "workers", "save_checkpoints"}
)
SECTIONS: Final = ("experiment", "sweep", "data", "model", "train")


def _sections(parser: configparser.ConfigParser) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {name: {} for name in SECTIONS}
    for name in parser.sections():
        if name not in out:
            raise ConfigError(f"unknown section [{name}]; expected one of {SECTIONS}")
        out[name].update(parser[name])
    return out


def _parse_overrides(overrides: Mapping[str, str] | None) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {name: {} for name in SECTIONS}
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if not key or section not in out:
            raise ConfigError(
                f"override {dotted!r} must look like <section>.<key> with section in {SECTIONS}"
            )
        out[section][key] = str(value)
    return out


def load_config(path: Path | None = None, overrides: Mapping[str, str] | None = None) -> ExperimentConfig:
    """
    Resolve defaults, *path* and *overrides* into an :class:`ExperimentConfig`.

    ``overrides`` maps ``"section.key"`` to raw strings, exactly as they
    would be written in the file.
    """
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
    sections = _sections(parser)
    for section, values in _parse_overrides(overrides).items():
        sections[section].update(values)

    base = ExperimentConfig(output_dir=env_output_dir(), workers=env_workers())
    for section, keys in (("experiment", _EXPERIMENT_KEYS), ("sweep", _SWEEP_KEYS)):
        stray = set(sections[section]) - keys
        if stray:
            raise ConfigError(f"unknown key [{section}] {sorted(stray)[0]}")
    merged = {**sections["experiment"], **sections["sweep"]}
    try:
        cfg = _apply(base, "experiment", merged)
        cfg = replace(
            cfg,
            model=_apply(cfg.model, "model", sections["model"], MODEL_DERIVED),
            run=_apply(cfg.run, "train", sections["train"], RUN_DERIVED),
            data=_apply(cfg.data, "data", sections["data"]),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    LOG.debug("resolved config %s (%d datasets, %d variants)", cfg.name, len(cfg.datasets), len(cfg.variants))
    return cfg


def to_ini(cfg: ExperimentConfig) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser["experiment"] = {k: _format(getattr(cfg, k)) for k in sorted(_EXPERIMENT_KEYS)}
    parser["sweep"] = {k: _format(getattr(cfg, k)) for k in sorted(_SWEEP_KEYS)}
    parser["data"] = {f.name: _format(getattr(cfg.data, f.name)) for f in fields(cfg.data)}
    parser["model"] = {
        f.name: _format(getattr(cfg.model, f.name)) for f in fields(cfg.model) if f.name not in MODEL_DERIVED
    }
    parser["train"] = {
        f.name: _format(getattr(cfg.run, f.name)) for f in fields(cfg.run) if f.name not in RUN_DERIVED
    }
    return parser


def echo_config(cfg: ExperimentConfig, out_dir: Path) -> Path:
    """Write every resolved value to ``<out_dir>/config.ini``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / CONFIG_ECHO
    with path.open("w", encoding="utf-8") as fh:
        to_ini(cfg).write(fh)
    return path


__all__ = [
    "ExperimentConfig",
    "load_config",
    "echo_config",
    "to_ini",
    "env_workers",
    "env_output_dir",
    "CONFIG_ECHO",
    "SECTIONS",
]
