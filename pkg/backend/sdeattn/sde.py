"""
sde.py
~~~~~~
Euler–Maruyama integration of the latent Neural SDE

    dh = f(h, t) dt + g(h, t) ⊙ dW

along a fixed, seeded Brownian path.

* Diffusion is diagonal: ``g`` emits one scale per latent channel.
* ``f`` and ``g`` see time as one extra input feature, ``t / span``.
* Gradients are taken through the discrete solver (no adjoint).
* ``zero_diffusion`` drops the noise term entirely, which makes the
  solver an explicit Euler scheme for the Neural ODE ``dh/dt = f(h, t)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import IntegrationDiverged, SolverError
from .layers import MlpNet, ParameterStore, mlp_forward
from .tensor import Tensor, as_tensor, concat, where

LOG = logging.getLogger("sde")

Field = Callable[[Tensor, float], Tensor]
"""A drift or diffusion field: ``(h [B, H], t) -> [B, H]``."""


# ── Brownian path ─────────────────────────────────────────────────────────
@dataclass(frozen=True)
class BrownianPath:
    """Increments ``dW[k] ~ N(0, grid[k+1] − grid[k])`` for each grid interval."""

    grid: np.ndarray  # [K + 1]
    increments: np.ndarray  # [K, B, H]
    seed: int

    @property
    def steps(self) -> int:
        return self.increments.shape[0]

    def index_of(self, t: float) -> int:
        """Position of *t* on the grid; *t* must be a grid point."""
        k = int(np.searchsorted(self.grid, t))
        for cand in (k, k - 1):
            if 0 <= cand < self.grid.size and abs(self.grid[cand] - t) <= 1e-12 * max(1.0, abs(t)):
                return cand
        raise SolverError(f"time {t!r} is not a point of the Brownian grid")

    def value_at(self, t: float) -> np.ndarray:
        """``W(t) − W(grid[0])`` as ``[B, H]``."""
        k = self.index_of(t)
        return self.increments[:k].sum(axis=0)

    def select(self, rows: np.ndarray) -> "BrownianPath":
        """Same path restricted to trajectories *rows*."""
        return BrownianPath(self.grid, self.increments[:, np.asarray(rows)], self.seed)


def _check_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if grid.size < 2:
        raise SolverError(f"a Brownian grid needs at least 2 points, got {grid.size}")
    if not np.all(np.diff(grid) > 0):
        raise SolverError("Brownian grid must be strictly increasing")
    return grid


def sample_brownian(grid: np.ndarray, batch: int, width: int, seed: int) -> BrownianPath:
    """Draw a reproducible path: same grid and seed give identical bits."""
    grid = _check_grid(grid)
    rng = np.random.default_rng(int(seed))
    dt = np.diff(grid)
    noise = rng.standard_normal((dt.size, batch, width))
    return BrownianPath(grid=grid, increments=noise * np.sqrt(dt)[:, None, None], seed=int(seed))


def build_subgrid(timestamps: np.ndarray, substeps: int, t_start: float = 0.0) -> np.ndarray:
    """
    Uniform solver grid: each interval ``(t_{i-1}, t_i]`` (with ``t_0 =
    t_start``) is split into *substeps* equal pieces.  A zero-length first
    interval contributes no pieces.  Observation times are grid points.
    """
    if substeps < 1:
        raise SolverError(f"substeps must be >= 1, got {substeps}")
    ts = np.asarray(timestamps, dtype=np.float64).reshape(-1)
    if ts.size == 0:
        raise SolverError("no timestamps")
    if ts[0] < t_start or np.any(np.diff(ts) <= 0):
        raise SolverError("timestamps must be strictly increasing and start at or after t_start")
    points = [np.array([t_start])]
    prev = t_start
    frac = np.arange(1, substeps + 1) / substeps
    for t in ts:
        if t > prev:
            pieces = prev + (t - prev) * frac
            pieces[-1] = t
            points.append(pieces)
        prev = t
    grid = np.concatenate(points)
    if grid.size < 2:
        # a single observation at t_start: keep a valid one-interval grid
        grid = np.array([t_start, t_start + 1.0])
    return grid


# ── Dynamics ──────────────────────────────────────────────────────────────
class TimeConditioned:
    """Wrap an MLP so it receives ``concat(h, t)`` as input."""

    def __init__(self, net: MlpNet) -> None:
        self.net = net

    def __call__(self, h: Tensor, t: float) -> Tensor:
        h = as_tensor(h)
        t_col = Tensor(np.full(h.shape[:-1] + (1,), float(t)))
        return mlp_forward(self.net, concat([h, t_col], axis=-1))


@dataclass
class SdeDynamics:
    drift: Field
    diffusion: Field | None
    zero_diffusion: bool = False
    nets: dict[str, MlpNet] = field(default_factory=dict)

    @classmethod
    def create(
        cls,
        store: ParameterStore,
        latent_dim: int,
        hidden: int,
        *,
        zero_diffusion: bool = False,
    ) -> "SdeDynamics":
        sizes = (latent_dim + 1, hidden, latent_dim)
        drift = MlpNet.create(store, "drift", sizes)
        diffusion = MlpNet.create(store, "diffusion", sizes)
        return cls(
            drift=TimeConditioned(drift),
            diffusion=TimeConditioned(diffusion),
            zero_diffusion=zero_diffusion,
            nets={"drift": drift, "diffusion": diffusion},
        )


# ── Solver ────────────────────────────────────────────────────────────────
def _step(dyn: SdeDynamics, h: Tensor, t: float, dt: float, dW: np.ndarray) -> Tensor:
    out = h + dyn.drift(h, t) * dt
    if dyn.diffusion is not None and not dyn.zero_diffusion:
        out = out + dyn.diffusion(h, t) * Tensor(dW)
    return out


def em_step(dyn: SdeDynamics, h: Tensor, t: float, dt: float, dW: np.ndarray) -> Tensor:
    """``h + f(h, t)·dt + g(h, t) ⊙ dW``; raises when the result is not finite."""
    if not dt > 0:
        raise SolverError(f"dt must be positive, got {dt}")
    out = _step(dyn, as_tensor(h), t, dt, np.asarray(dW, dtype=np.float64))
    if not np.all(np.isfinite(out.data)):
        rows = np.flatnonzero(~np.isfinite(out.data).reshape(out.shape[0], -1).all(axis=1))
        raise IntegrationDiverged(f"non-finite latent at t={t:.6g}", rows=rows.tolist())
    return out


def _window(path: BrownianPath, t0: float, t1: float, substeps: int | None) -> tuple[int, int]:
    if not t1 > t0:
        raise SolverError(f"integration needs t1 > t0, got ({t0}, {t1})")
    start, stop = path.index_of(t0), path.index_of(t1)
    if substeps is not None and stop - start != substeps:
        raise SolverError(
            f"path/grid mismatch: [{t0}, {t1}] spans {stop - start} path intervals, "
            f"expected {substeps}"
        )
    return start, stop


def integrate(
    dyn: SdeDynamics,
    h0: Tensor,
    t0: float,
    t1: float,
    path: BrownianPath,
    substeps: int | None = None,
    *,
    span: float = 1.0,
) -> Tensor:
    """
    Compose :func:`em_step` over the path's grid points in ``[t0, t1]``.

    Returns the pre-RNN state at *t1*.  ``substeps``, when given, must
    equal the number of path intervals inside the window.
    """
    start, stop = _window(path, t0, t1, substeps)
    h = as_tensor(h0)
    for k in range(start, stop):
        dt = path.grid[k + 1] - path.grid[k]
        h = em_step(dyn, h, path.grid[k] / span, dt, path.increments[k])
    return h


def integrate_guarded(
    dyn: SdeDynamics,
    h0: Tensor,
    t0: float,
    t1: float,
    path: BrownianPath,
    substeps: int | None = None,
    *,
    span: float = 1.0,
) -> tuple[Tensor, np.ndarray]:
    """
    Like :func:`integrate` but never raises on divergence: rows that turn
    non-finite are zeroed from then on and flagged in the returned mask.
    """
    start, stop = _window(path, t0, t1, substeps)
    h = as_tensor(h0)
    diverged = np.zeros(h.shape[0], dtype=bool)
    for k in range(start, stop):
        dt = path.grid[k + 1] - path.grid[k]
        h = _step(dyn, h, path.grid[k] / span, dt, path.increments[k])
        finite = np.isfinite(h.data).all(axis=-1)
        if not finite.all():
            LOG.debug("rows %s diverged at t=%.4g", np.flatnonzero(~finite).tolist(), path.grid[k])
            diverged |= ~finite
            h = where(finite[:, None], h, 0.0)
    return h, diverged


__all__ = [
    "BrownianPath",
    "sample_brownian",
    "build_subgrid",
    "TimeConditioned",
    "SdeDynamics",
    "em_step",
    "integrate",
    "integrate_guarded",
]
