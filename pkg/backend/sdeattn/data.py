"""
data.py
~~~~~~~
Irregular time-series batches, the synthetic periodic generator with OU
noise, MCAR masking and the interpolation hold-out.

A :class:`TimeSeriesBatch` always satisfies ``values * (1 - mask) == 0``:
the constructor zeroes unobserved entries (``x̃ = m ⊙ x``).  Trajectories in
one batch share their time grid, so static channel attention has a
well-defined "time index i" across the batch.

Periodic generator
------------------
    y(t) = A(t) · sin(φ(t)) + z0 + η(t),   φ(t) = ∫₀ᵗ 2π f(s) ds

* ``A`` and ``f`` drift linearly over ``[0, 1]`` between two uniform draws.
* ``φ`` is the cumulative trapezoidal integral from ``t = 0``.
* ``η`` is an Ornstein–Uhlenbeck path sampled with the exact transition.
* Every ``grid_group`` consecutive trajectories share one sorted-uniform
  grid and form one batch.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .constants import STREAM_DATA
from .errors import ConfigError, DataFormatError
from .seeding import stream

LOG = logging.getLogger("data")


# ── Batch container ───────────────────────────────────────────────────────
@dataclass(frozen=True)
class TimeSeriesBatch:
    values: np.ndarray  # [T, B, D]
    timestamps: np.ndarray  # [T]
    mask: np.ndarray  # [T, B, D], 0/1
    labels: np.ndarray | None = None  # [B]
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=np.float64)
        ts = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
        if values.ndim != 3:
            raise DataFormatError(f"values must be [T, B, D], got shape {values.shape}")
        if mask.shape != values.shape:
            raise DataFormatError(f"mask shape {mask.shape} != values shape {values.shape}")
        if ts.size != values.shape[0]:
            raise DataFormatError(f"{ts.size} timestamps for {values.shape[0]} time steps")
        if np.any(np.diff(ts) <= 0):
            raise DataFormatError("timestamps must be strictly increasing")
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise DataFormatError("mask entries must be 0 or 1")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64).reshape(-1)
            if labels.size != values.shape[1]:
                raise DataFormatError(f"{labels.size} labels for batch of {values.shape[1]}")
        object.__setattr__(self, "values", np.where(mask > 0, values, 0.0))
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "labels", labels)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def size(self) -> int:
        return self.values.shape[1]

    @property
    def dims(self) -> int:
        return self.values.shape[2]

    def observed_fraction(self) -> float:
        return float(self.mask.mean()) if self.mask.size else 0.0

    def select(self, rows: Sequence[int] | np.ndarray) -> "TimeSeriesBatch":
        rows = np.asarray(rows, dtype=np.intp)
        return TimeSeriesBatch(
            values=self.values[:, rows],
            timestamps=self.timestamps,
            mask=self.mask[:, rows],
            labels=None if self.labels is None else self.labels[rows],
            meta=dict(self.meta),
        )

    def with_mask(self, mask: np.ndarray, **meta: Any) -> "TimeSeriesBatch":
        return replace(self, mask=mask, meta={**self.meta, **meta})


# ── Ornstein–Uhlenbeck noise ──────────────────────────────────────────────
def ou_noise(
    timestamps: np.ndarray,
    theta: float,
    mu: float,
    sigma: float,
    seed: int | np.random.Generator,
    eta0: float | None = None,
) -> np.ndarray:
    """
    Exact OU transition on an arbitrary increasing grid.

    ``η₀`` is drawn from the stationary law ``N(μ, σ²/(2θ))`` unless given.
    """
    if not theta > 0:
        raise ConfigError(f"OU mean-reversion rate must be positive, got {theta}")
    if sigma < 0:
        raise ConfigError(f"OU volatility must be non-negative, got {sigma}")
    ts = np.asarray(timestamps, dtype=np.float64).reshape(-1)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    xi = rng.standard_normal(ts.size)
    out = np.empty(ts.size)
    if ts.size == 0:
        return out
    stationary_sd = sigma / math.sqrt(2.0 * theta)
    out[0] = mu + stationary_sd * xi[0] if eta0 is None else eta0
    decay = np.exp(-theta * np.diff(ts))
    scale = sigma * np.sqrt((1.0 - decay**2) / (2.0 * theta))
    for k in range(1, ts.size):
        out[k] = out[k - 1] * decay[k - 1] + mu * (1.0 - decay[k - 1]) + scale[k - 1] * xi[k]
    return out


# ── Periodic dataset ──────────────────────────────────────────────────────
@dataclass(frozen=True)
class PeriodicSpec:
    n_trajectories: int = 1000
    n_points: int = 100
    amplitude_range: tuple[float, float] = (0.5, 1.5)
    frequency_range: tuple[float, float] = (0.8, 1.2)
    offset_range: tuple[float, float] = (-0.5, 0.5)
    theta: float = 2.0
    mu: float = 0.0
    sigma: float = 0.2
    grid_group: int = 32
    seed: int = 0

    def validate(self) -> None:
        if self.n_trajectories < 1 or self.n_points < 1 or self.grid_group < 1:
            raise ConfigError(
                f"counts must be positive (trajectories={self.n_trajectories}, "
                f"points={self.n_points}, grid_group={self.grid_group})"
            )
        if not self.theta > 0 or self.sigma < 0:
            raise ConfigError(f"bad OU parameters theta={self.theta} sigma={self.sigma}")


def _linear_process(rng: np.random.Generator, lo_hi: tuple[float, float], ts: np.ndarray) -> np.ndarray:
    start, end = rng.uniform(lo_hi[0], lo_hi[1], size=2)
    return start + (end - start) * ts


def cumulative_phase(ts: np.ndarray, freq: np.ndarray, f0: float) -> np.ndarray:
    """Cumulative trapezoid of ``2π f`` from ``t = 0`` (where ``f = f0``)."""
    t = np.concatenate([[0.0], ts])
    f = np.concatenate([[f0], freq])
    return np.cumsum(np.pi * (f[1:] + f[:-1]) * np.diff(t))


def generate_periodic(spec: PeriodicSpec) -> list[TimeSeriesBatch]:
    """Grid-aligned batches of noisy periodic trajectories, fully observed."""
    spec.validate()
    batches: list[TimeSeriesBatch] = []
    n_groups = math.ceil(spec.n_trajectories / spec.grid_group)
    for g in range(n_groups):
        start = g * spec.grid_group
        count = min(spec.grid_group, spec.n_trajectories - start)
        grid = np.sort(stream(spec.seed, STREAM_DATA, "grid", g).uniform(0.0, 1.0, spec.n_points))
        if np.any(np.diff(grid) <= 0):
            raise DataFormatError(f"duplicate sample times in group {g}; use fewer points")
        values = np.empty((spec.n_points, count, 1))
        for j in range(count):
            rng = stream(spec.seed, STREAM_DATA, "trajectory", start + j)
            amp = _linear_process(rng, spec.amplitude_range, grid)
            f_start, f_end = rng.uniform(spec.frequency_range[0], spec.frequency_range[1], size=2)
            freq = f_start + (f_end - f_start) * grid
            z0 = rng.uniform(spec.offset_range[0], spec.offset_range[1])
            noise = (
                ou_noise(grid, spec.theta, spec.mu, spec.sigma, rng)
                if spec.sigma > 0
                else np.full(grid.size, spec.mu)
            )
            values[:, j, 0] = amp * np.sin(cumulative_phase(grid, freq, f_start)) + z0 + noise
        batches.append(
            TimeSeriesBatch(
                values=values,
                timestamps=grid,
                mask=np.ones_like(values),
                meta={"dataset": "periodic", "group": g, "spec": asdict(spec)},
            )
        )
    LOG.info("generated %d periodic trajectories in %d grid groups", spec.n_trajectories, n_groups)
    return batches


def generate_frequency_classes(
    n_series: int,
    n_points: int = 50,
    frequencies: Sequence[float] = (1.0, 1.3),
    seed: int = 0,
    noise: float = 0.0,
    split: str = "train",
) -> TimeSeriesBatch:
    """
    Two-or-more-class frequency discrimination on a regular ``[0, 1]`` grid.

    Series ``k`` has class ``k mod C``; phase is uniform on ``[0, 2π)``.
    """
    if n_series < 1 or n_points < 2:
        raise ConfigError(f"need n_series >= 1 and n_points >= 2, got {n_series}, {n_points}")
    rng = stream(seed, STREAM_DATA, "frequency-classes", split)
    ts = np.linspace(0.0, 1.0, n_points)
    labels = np.arange(n_series) % len(frequencies)
    phase = rng.uniform(0.0, 2.0 * np.pi, n_series)
    freq = np.asarray(frequencies, dtype=np.float64)[labels]
    values = np.sin(2.0 * np.pi * freq[None, :] * ts[:, None] + phase[None, :])
    if noise > 0:
        values = values + noise * rng.standard_normal(values.shape)
    values = values[:, :, None]
    return TimeSeriesBatch(
        values=values,
        timestamps=ts,
        mask=np.ones_like(values),
        labels=labels,
        meta={"dataset": "frequency", "split": split, "frequencies": list(map(float, frequencies))},
    )


# ── Missingness ───────────────────────────────────────────────────────────
def apply_mcar(
    batch: TimeSeriesBatch,
    rate: float,
    seed: int | np.random.Generator,
    *,
    keep_first: bool = False,
) -> TimeSeriesBatch:
    """Drop each currently observed entry independently with probability *rate*."""
    if not 0.0 <= rate <= 1.0:
        raise ConfigError(f"missing rate must lie in [0, 1], got {rate}")
    if rate == 0.0:
        return batch
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    keep = rng.random(batch.mask.shape) >= rate
    mask = batch.mask * keep
    if keep_first:
        mask[0] = batch.mask[0]
    return batch.with_mask(mask, missing_rate=rate)


def hold_out_observation(
    batch: TimeSeriesBatch,
    observed_rate: float,
    seed: int | np.random.Generator,
) -> tuple[TimeSeriesBatch, TimeSeriesBatch]:
    """
    Keep ``ceil(q·T)`` time points per trajectory (always the first) as
    conditioning input.

    Returns:
        ``(conditioning, targets)``; targets are *batch* itself.
    """
    if not 0.0 < observed_rate <= 1.0:
        raise ConfigError(f"observed rate must lie in (0, 1], got {observed_rate}")
    length = batch.length
    # guard against 0.3 * 100 = 30.000000000000004
    keep_count = int(math.ceil(observed_rate * length - 1e-9))
    if keep_count < 1:
        raise ConfigError(f"observed rate {observed_rate} keeps no point of {length}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    keep = np.zeros((length, batch.size), dtype=bool)
    keep[0] = True
    for b in range(batch.size):
        extra = rng.choice(np.arange(1, length), size=keep_count - 1, replace=False)
        keep[extra, b] = True
    cond = batch.with_mask(batch.mask * keep[:, :, None], observed_rate=observed_rate)
    return cond, batch


# ── Normalisation ─────────────────────────────────────────────────────────
@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray  # [D]
    std: np.ndarray  # [D]


def fit_normalizer(batch: TimeSeriesBatch) -> Normalizer:
    """Per-channel mean / population std over observed entries."""
    count = batch.mask.sum(axis=(0, 1))
    safe = np.maximum(count, 1.0)
    mean = batch.values.sum(axis=(0, 1)) / safe
    var = (((batch.values - mean) * batch.mask) ** 2).sum(axis=(0, 1)) / safe
    std = np.sqrt(var)
    return Normalizer(mean=mean, std=np.where(std > 0, std, 1.0))


def apply_normalizer(batch: TimeSeriesBatch, norm: Normalizer) -> TimeSeriesBatch:
    values = (batch.values - norm.mean) / norm.std
    return replace(
        batch,
        values=values,
        meta={**batch.meta, "norm_mean": norm.mean.tolist(), "norm_std": norm.std.tolist()},
    )


# ── Pools & mini-batches ──────────────────────────────────────────────────
def split_groups(
    groups: Sequence[TimeSeriesBatch], test_fraction: float
) -> tuple[list[TimeSeriesBatch], list[TimeSeriesBatch]]:
    """Trailing ``ceil(fraction · G)`` groups become the test split."""
    if not 0.0 < test_fraction < 1.0 or len(groups) < 2:
        raise ConfigError(
            f"need >= 2 groups and test fraction in (0, 1), got {len(groups)} and {test_fraction}"
        )
    n_test = min(len(groups) - 1, max(1, math.ceil(test_fraction * len(groups))))
    return list(groups[:-n_test]), list(groups[-n_test:])


def sample_minibatch(
    pool: Sequence[TimeSeriesBatch], batch_size: int, rng: np.random.Generator
) -> tuple[int, np.ndarray]:
    """Pick one group, then at most *batch_size* of its rows (sorted)."""
    g = int(rng.integers(len(pool)))
    size = pool[g].size
    if size <= batch_size:
        return g, np.arange(size)
    return g, np.sort(rng.choice(size, size=batch_size, replace=False))


def chunk_rows(size: int, batch_size: int) -> list[np.ndarray]:
    """Consecutive row blocks; ``batch_size <= 0`` means one block."""
    if batch_size <= 0 or batch_size >= size:
        return [np.arange(size)]
    return [np.arange(i, min(i + batch_size, size)) for i in range(0, size, batch_size)]


# ── Cache ─────────────────────────────────────────────────────────────────
def save_cached(path: Path, batches: Sequence[TimeSeriesBatch], spec: dict[str, Any]) -> Path:
    """Store *batches* plus a JSON echo of the generating spec in one ``.npz``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: dict[str, np.ndarray] = {"spec": np.array(json.dumps(spec, sort_keys=True))}
    for g, b in enumerate(batches):
        arrays[f"values_{g}"] = b.values
        arrays[f"timestamps_{g}"] = b.timestamps
        arrays[f"mask_{g}"] = b.mask
        if b.labels is not None:
            arrays[f"labels_{g}"] = b.labels
    with path.open("wb") as fh:
        np.savez_compressed(fh, **arrays)
    LOG.info("cached %d batches → %s", len(batches), path)
    return path


def load_cached(path: Path) -> tuple[list[TimeSeriesBatch], dict[str, Any]] | None:
    """Inverse of :func:`save_cached`; a missing or unreadable file gives ``None``."""
    path = Path(path)
    if not path.exists():
        return None
    try:
        with np.load(path, allow_pickle=False) as npz:
            spec = json.loads(str(npz["spec"]))
            batches = []
            g = 0
            while f"values_{g}" in npz.files:
                batches.append(
                    TimeSeriesBatch(
                        values=npz[f"values_{g}"],
                        timestamps=npz[f"timestamps_{g}"],
                        mask=npz[f"mask_{g}"],
                        labels=npz[f"labels_{g}"] if f"labels_{g}" in npz.files else None,
                        meta={"dataset": spec.get("dataset", "cached"), "group": g},
                    )
                )
                g += 1
    except Exception as exc:  # noqa: BLE001
        LOG.warning("[cache] ignoring unreadable %s: %s", path, exc)
        return None
    return batches, spec


__all__ = [
    "TimeSeriesBatch",
    "ou_noise",
    "PeriodicSpec",
    "cumulative_phase",
    "generate_periodic",
    "generate_frequency_classes",
    "apply_mcar",
    "hold_out_observation",
    "Normalizer",
    "fit_normalizer",
    "apply_normalizer",
    "split_groups",
    "sample_minibatch",
    "chunk_rows",
    "save_cached",
    "load_cached",
]
