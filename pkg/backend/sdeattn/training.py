"""
training.py
~~~~~~~~~~~
Seeded training and evaluation of an :class:`SdeRnnModel`.

Every random choice is a pure function of ``RunConfig.seed``:

* parameter initialisation (per-name streams, see ``layers``)
* mini-batch sampling (``STREAM_SHUFFLE``)
* Brownian paths (``STREAM_BROWNIAN``, one fixed path per pool group and
  split; per iteration when ``resample_path``)
* MCAR masks and interpolation hold-outs (static per split; per iteration
  when ``resample_mask``)

One iteration is one Adam step on one mini-batch drawn from one group of
the pool (groups share a time grid).  Gradients are clipped to a global
norm before the step; a step with non-finite gradients is skipped.

Notes
-----
Static channel attention couples the trajectories of a batch, so the
evaluation batch size changes its predictions.  ``eval_batch_size = 0``
evaluates each group in one piece; the value used is reported with every
result.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from .checkpoint import Checkpoint
from .constants import (
    ADAM_EPS,
    BATCH_SIZE,
    BETA1,
    BETA2,
    CLIP_NORM,
    ITERATIONS,
    LEARNING_RATE,
    STREAM_BROWNIAN,
    STREAM_HOLDOUT,
    STREAM_MCAR_TEST,
    STREAM_MCAR_TRAIN,
    STREAM_SHUFFLE,
)
from .data import TimeSeriesBatch, apply_mcar, chunk_rows, hold_out_observation, sample_minibatch
from .errors import ConfigError, LossError, TrainingAborted
from .metrics import MetricsReport, ResultRow
from .model import (
    ForwardTrace,
    ModelConfig,
    SdeRnnModel,
    classification_logits,
    cross_entropy,
    forward,
    interpolation_loss,
    predict,
)
from .optim import AdamState, adam_step, clip_grad_norm
from .run_logging import RunLog
from .sde import BrownianPath
from .seeding import derive_seed, stream
from .tensor import Tape, Tensor, no_grad

LOG = logging.getLogger("training")

TASKS = ("classification", "interpolation")


# ── Configuration & records ───────────────────────────────────────────────
@dataclass(frozen=True)
class RunConfig:
    task: str = "classification"
    iterations: int = ITERATIONS
    epochs: int = 0  # > 0 overrides iterations
    batch_size: int = BATCH_SIZE
    lr: float = LEARNING_RATE
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = ADAM_EPS
    clip_norm: float = CLIP_NORM
    missing_rate: float = 0.0
    observed_rate: float = 1.0
    resample_mask: bool = False
    resample_path: bool = False
    eval_batch_size: int = 0
    log_every: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.iterations < 0 or self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("iterations/epochs must be >= 0 and batch_size >= 1")
        if not 0.0 <= self.missing_rate <= 1.0:
            raise ConfigError(f"missing_rate must lie in [0, 1], got {self.missing_rate}")
        if not 0.0 < self.observed_rate <= 1.0:
            raise ConfigError(f"observed_rate must lie in (0, 1], got {self.observed_rate}")

    @property
    def rate(self) -> float:
        """The swept rate: missing rate (classification) or observed rate (interpolation)."""
        return self.observed_rate if self.task == "interpolation" else self.missing_rate

    def total_iterations(self, pool_rows: int) -> int:
        if self.epochs > 0:
            return self.epochs * math.ceil(pool_rows / self.batch_size)
        return self.iterations


@dataclass
class TrainRun:
    seed: int
    iterations: int
    batch_size: int
    losses: list[float] = field(default_factory=list)
    wall_ms: float = 0.0
    diverged_count: int = 0
    skipped_updates: int = 0

    @property
    def completed(self) -> int:
        return len(self.losses)

    def to_dict(self) -> dict:
        return asdict(self)


# ── Views: masking / hold-out per split ───────────────────────────────────
def make_view(
    batch: TimeSeriesBatch,
    cfg: RunConfig,
    split: str,
    group: int,
    iteration: int | None = None,
) -> tuple[TimeSeriesBatch, TimeSeriesBatch]:
    """``(conditioning, target)`` for one pool group."""
    keys: tuple[int | str, ...] = (split, group) if iteration is None else (split, group, iteration)
    mcar_stream = STREAM_MCAR_TRAIN if split == "train" else STREAM_MCAR_TEST
    cond, target = batch, batch
    if cfg.task == "interpolation":
        cond, target = hold_out_observation(batch, cfg.observed_rate, stream(cfg.seed, STREAM_HOLDOUT, *keys))
    if cfg.missing_rate > 0:
        cond = apply_mcar(cond, cfg.missing_rate, stream(cfg.seed, mcar_stream, *keys), keep_first=True)
    return cond, target


class _Paths:
    """Lazily sampled fixed Brownian path per (split, group)."""

    def __init__(self, model: SdeRnnModel, pool: Sequence[TimeSeriesBatch], seed: int, split: str) -> None:
        self.model, self.pool, self.seed, self.split = model, pool, seed, split
        self._fixed: dict[int, BrownianPath] = {}

    def get(self, group: int, iteration: int | None = None) -> BrownianPath:
        if iteration is not None:
            return self.model.sample_path(
                self.pool[group], derive_seed(self.seed, STREAM_BROWNIAN, self.split, group, iteration)
            )
        if group not in self._fixed:
            self._fixed[group] = self.model.sample_path(
                self.pool[group], derive_seed(self.seed, STREAM_BROWNIAN, self.split, group)
            )
        return self._fixed[group]


def objective(model: SdeRnnModel, trace: ForwardTrace, target: TimeSeriesBatch, task: str) -> Tensor:
    if task == "interpolation":
        return interpolation_loss(trace, target)
    if target.labels is None:
        raise ConfigError("classification needs labelled data")
    return cross_entropy(classification_logits(model, trace), target.labels, trace.valid)


# ── Training ──────────────────────────────────────────────────────────────
def train(
    model_config: ModelConfig,
    pool: Sequence[TimeSeriesBatch],
    run_config: RunConfig,
    *,
    log_path: Path | None = None,
) -> tuple[Checkpoint, TrainRun]:
    """
    Train from a fresh initialisation seeded by ``run_config.seed``.

    Raises:
        TrainingAborted: every trajectory of a mini-batch diverged; the
                         exception's ``run`` holds the partial record.
    """
    if not pool:
        raise ConfigError("empty training pool")
    cfg = run_config
    model = SdeRnnModel.create(replace(model_config, seed=cfg.seed))
    params = model.parameters()
    adam = AdamState(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    n_iter = cfg.total_iterations(sum(b.size for b in pool))
    run = TrainRun(seed=cfg.seed, iterations=n_iter, batch_size=cfg.batch_size)

    views = [make_view(b, cfg, "train", g) for g, b in enumerate(pool)]
    paths = _Paths(model, pool, cfg.seed, "train")
    rng = stream(cfg.seed, STREAM_SHUFFLE)
    t0 = time.perf_counter()

    with RunLog(log_path) as runlog:
        for it in range(n_iter):
            g, rows = sample_minibatch(pool, cfg.batch_size, rng)
            cond, target = make_view(pool[g], cfg, "train", g, it) if cfg.resample_mask else views[g]
            path = paths.get(g, it if cfg.resample_path else None).select(rows)
            cond, target = cond.select(rows), target.select(rows)

            with Tape() as tape:
                trace = forward(model, cond, path)
                try:
                    loss = objective(model, trace, target, cfg.task)
                except LossError as exc:
                    run.wall_ms = (time.perf_counter() - t0) * 1000.0
                    raise TrainingAborted(f"iteration {it}: {exc}", run=run) from exc
            tape.backward(loss, params)

            grads = [p.grad for p in params]
            grad_norm = clip_grad_norm(grads, cfg.clip_norm)
            if not adam_step(adam, params, grads):
                run.skipped_updates += 1
            run.losses.append(loss.item())
            run.diverged_count += int(trace.diverged.sum())

            wall_ms = (time.perf_counter() - t0) * 1000.0
            runlog.write(
                iteration=it,
                loss=run.losses[-1],
                grad_norm=grad_norm,
                wall_ms=round(wall_ms, 3),
                diverged=run.diverged_count,
            )
            if cfg.log_every and (it + 1) % cfg.log_every == 0:
                LOG.info(
                    "iter %d/%d loss %.5f diverged %d", it + 1, n_iter, run.losses[-1], run.diverged_count
                )

    run.wall_ms = (time.perf_counter() - t0) * 1000.0
    if run.diverged_count:
        LOG.warning("%d diverged trajectories over %d iterations", run.diverged_count, n_iter)
    return Checkpoint.from_model(model), run


# ── Evaluation ────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class EvalResult:
    metric: float
    diverged: int
    count: int
    eval_batch_size: int


def evaluate_checkpoint(
    checkpoint: Checkpoint,
    pool: Sequence[TimeSeriesBatch],
    run_config: RunConfig,
) -> EvalResult:
    """Accuracy (classification) or full-grid MSE (interpolation) on *pool*."""
    cfg = run_config
    model = checkpoint.to_model()
    paths = _Paths(model, pool, cfg.seed, "test")
    hits = total = 0.0
    diverged = 0
    with no_grad():
        for g, batch in enumerate(pool):
            cond, target = make_view(batch, cfg, "test", g)
            path = paths.get(g)
            for rows in chunk_rows(batch.size, cfg.eval_batch_size):
                trace = forward(model, cond.select(rows), path.select(rows))
                tgt = target.select(rows)
                diverged += int(trace.diverged.sum())
                valid = trace.valid
                if cfg.task == "classification":
                    pred = predict(classification_logits(model, trace))
                    hits += float((pred == tgt.labels)[valid].sum())
                    total += float(valid.sum())
                else:
                    weight = tgt.mask * valid[None, :, None]
                    hits += float((((trace.outputs.data - tgt.values) ** 2) * weight).sum())
                    total += float(weight.sum())
    if total == 0:
        raise LossError("empty evaluation set (no rows or every trajectory diverged)")
    return EvalResult(
        metric=hits / total, diverged=diverged, count=int(total), eval_batch_size=cfg.eval_batch_size
    )


def evaluate(
    checkpoints: Checkpoint | Mapping[int, Checkpoint],
    pool: Sequence[TimeSeriesBatch],
    task: str,
    run_config: RunConfig | None = None,
    *,
    dataset: str = "",
    variant: str = "",
) -> MetricsReport:
    """Evaluate one checkpoint or one per seed; rows keyed by the seed."""
    if isinstance(checkpoints, Checkpoint):
        checkpoints = {checkpoints.config.seed: checkpoints}
    base = run_config or RunConfig(task=task)
    base = replace(base, task=task)
    rows = []
    for seed, ckpt in sorted(checkpoints.items()):
        cfg = replace(base, seed=seed)
        res = evaluate_checkpoint(ckpt, pool, cfg)
        rows.append(
            ResultRow(
                dataset=dataset,
                variant=variant or ckpt.config.attention,
                task=task,
                rate=cfg.rate,
                seed=seed,
                metric=res.metric,
                diverged=res.diverged,
                eval_batch_size=res.eval_batch_size,
            )
        )
    return MetricsReport(rows)


__all__ = [
    "TASKS",
    "RunConfig",
    "TrainRun",
    "make_view",
    "objective",
    "train",
    "EvalResult",
    "evaluate_checkpoint",
    "evaluate",
]
