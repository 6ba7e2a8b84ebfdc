"""
model.py
~~~~~~~~
The SDE–RNN with a plug-in latent attention module.

For each observation ``i`` (``t_0 = 0``, ``h_0 = 0``):

    h'_i  = integrate(h_{i-1}, t_{i-1}, t_i)        pre-RNN state
    h̃'_i  = attention(h'_1..h'_i)  (or h'_i)          attended state
    h_i   = GRU(h̃'_i, Linear(x̃_i ∥ m_i))              post-RNN state
    o_i   = OutputNN(h'_i)

Interpolation scores ``o`` against the full target grid; classification
reads the final ``h_N`` (or the mean of ``h_i``) through a linear head.
Trajectories whose latent leaves the finite range are zeroed, flagged in
``ForwardTrace.diverged`` and left out of every loss.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, replace
from typing import Any

import numpy as np

from .attention import (
    LatentAttention,
    NoAttention,
    PyramidalAttention,
    PyramidConfig,
    StaticChannelAttention,
    StaticChannelAttnParams,
    TvfAttention,
    TvfAttnParams,
    pyramid_levels_for,
)
from .constants import (
    ATTENTION_KINDS,
    ATTN_HEADS,
    LATENT_DIM,
    OUTPUT_HIDDEN,
    SCHA_REDUCTION,
    SDE_HIDDEN,
    STRIDE_BASE,
    SUBSTEPS,
    TVF_MAX_LEN,
    VARIANTS,
)
from .data import TimeSeriesBatch
from .errors import ConfigError, DataFormatError, LossError, ShapeError
from .layers import GruCellParams, LinearLayer, MlpNet, ParameterStore, gru_step
from .sde import BrownianPath, SdeDynamics, build_subgrid, integrate_guarded, sample_brownian
from .tensor import (
    Parameter,
    Tensor,
    concat,
    log_softmax,
    reduce,
    stack,
    take,
    zeros,
)

LOG = logging.getLogger("model")

READOUTS = ("last", "mean")


# ── Configuration ─────────────────────────────────────────────────────────
@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 1
    latent_dim: int = LATENT_DIM
    sde_hidden: int = SDE_HIDDEN
    output_hidden: int = OUTPUT_HIDDEN
    attention: str = "none"
    substeps: int = SUBSTEPS
    heads: int = ATTN_HEADS
    scha_reduction: int = SCHA_REDUCTION
    pyramid_levels: int = 0  # 0: derived from seq_len
    stride_base: int = STRIDE_BASE
    tvf_max_len: int = TVF_MAX_LEN
    seq_len: int = 100
    n_classes: int = 0
    feed_mask: bool = True
    zero_diffusion: bool = False
    readout: str = "last"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.attention not in ATTENTION_KINDS:
            raise ConfigError(f"unknown attention kind {self.attention!r}; choose from {ATTENTION_KINDS}")
        if self.readout not in READOUTS:
            raise ConfigError(f"readout must be one of {READOUTS}, got {self.readout!r}")
        if min(self.input_dim, self.latent_dim, self.sde_hidden, self.output_hidden, self.substeps) < 1:
            raise ConfigError("widths and substeps must be positive")
        if self.attention == "tvf-transformer" and self.seq_len > self.tvf_max_len:
            raise ConfigError(f"seq_len {self.seq_len} exceeds tvf_max_len {self.tvf_max_len}")

    @classmethod
    def for_variant(cls, variant: str, **kwargs: Any) -> "ModelConfig":
        if variant not in VARIANTS:
            raise ConfigError(f"unknown model variant {variant!r}; choose from {sorted(VARIANTS)}")
        return cls(attention=VARIANTS[variant], **kwargs)

    @property
    def levels(self) -> int:
        return self.pyramid_levels or pyramid_levels_for(self.seq_len)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


# ── Model ─────────────────────────────────────────────────────────────────
@dataclass
class SdeRnnModel:
    config: ModelConfig
    store: ParameterStore
    dynamics: SdeDynamics
    encoder: LinearLayer
    gru: GruCellParams
    attention: LatentAttention
    output_net: MlpNet
    classifier: LinearLayer | None = None

    @classmethod
    def create(cls, config: ModelConfig) -> "SdeRnnModel":
        store = ParameterStore(config.seed)
        h = config.latent_dim
        dynamics = SdeDynamics.create(store, h, config.sde_hidden, zero_diffusion=config.zero_diffusion)
        enc_in = 2 * config.input_dim if config.feed_mask else config.input_dim
        encoder = LinearLayer.create(store, "encoder", enc_in, h)
        gru = GruCellParams.create(store, "gru", h, h)
        attention = _build_attention(store, config)
        output_net = MlpNet.create(store, "output", (h, config.output_hidden, config.input_dim))
        classifier = (
            LinearLayer.create(store, "classifier", h, config.n_classes) if config.n_classes > 0 else None
        )
        LOG.debug(
            "built %s model: %d tensors, %d values",
            config.attention,
            len(store),
            store.num_values(),
        )
        return cls(config, store, dynamics, encoder, gru, attention, output_net, classifier)

    def parameters(self) -> list[Parameter]:
        return list(self.store)

    def sample_path(self, batch: TimeSeriesBatch, seed: int) -> BrownianPath:
        grid = build_subgrid(batch.timestamps, self.config.substeps)
        return sample_brownian(grid, batch.size, self.config.latent_dim, seed)

    def with_gate_override(self, gate: np.ndarray | None) -> "SdeRnnModel":
        """Copy sharing parameters, with a fixed static-channel gate."""
        if not isinstance(self.attention, StaticChannelAttention):
            raise ConfigError("a gate override needs static-channel attention")
        return replace(self, attention=replace(self.attention, gate_override=gate))


def _build_attention(store: ParameterStore, cfg: ModelConfig) -> LatentAttention:
    h = cfg.latent_dim
    if cfg.attention == "none":
        return NoAttention()
    if cfg.attention == "static-channel":
        params = StaticChannelAttnParams.create(store, "attention", h, cfg.scha_reduction)
        return StaticChannelAttention(params)
    if cfg.attention in ("tvf-lstm", "tvf-transformer"):
        variant = "lstm" if cfg.attention == "tvf-lstm" else "transformer"
        return TvfAttention(
            TvfAttnParams.create(store, "attention", h, variant, heads=cfg.heads, max_len=cfg.tvf_max_len)
        )
    return PyramidalAttention(
        PyramidConfig.create(store, "attention", h, cfg.levels, heads=cfg.heads, stride_base=cfg.stride_base)
    )


# ── Forward pass ──────────────────────────────────────────────────────────
@dataclass
class ForwardTrace:
    pre: Tensor  # h'   [T, B, H]
    attended: Tensor  # h̃'  [T, B, H]
    post: Tensor  # h    [T, B, H]
    outputs: Tensor  # o    [T, B, D]
    diverged: np.ndarray  # [B] bool

    @property
    def valid(self) -> np.ndarray:
        return ~self.diverged


def forward(model: SdeRnnModel, batch: TimeSeriesBatch, path: BrownianPath) -> ForwardTrace:
    cfg = model.config
    if batch.dims != cfg.input_dim:
        raise ShapeError(f"batch has {batch.dims} channels, model expects {cfg.input_dim}")
    ts = batch.timestamps
    if ts[0] < 0 or np.any(np.diff(ts) <= 0):
        raise DataFormatError("timestamps must be non-negative and strictly increasing")
    if path.increments.shape[1:] != (batch.size, cfg.latent_dim):
        raise ShapeError(
            f"Brownian path is {path.increments.shape[1:]}, batch needs ({batch.size}, {cfg.latent_dim})"
        )
    span = ts[-1] if ts[-1] > 0 else 1.0

    h = zeros(batch.size, cfg.latent_dim)
    t_prev = 0.0
    diverged = np.zeros(batch.size, dtype=bool)
    attn_state = model.attention.start(batch.size)
    pre, attended, post, outputs = [], [], [], []
    for i in range(batch.length):
        t_i = float(ts[i])
        if t_i > t_prev:
            h_pre, hit = integrate_guarded(model.dynamics, h, t_prev, t_i, path, cfg.substeps, span=span)
            diverged |= hit
        else:
            h_pre = h
        h_att = model.attention.step(attn_state, h_pre)
        x = Tensor(batch.values[i])
        if cfg.feed_mask:
            x = concat([x, Tensor(batch.mask[i])], axis=-1)
        h = gru_step(model.gru, h_att, model.encoder(x))
        pre.append(h_pre)
        attended.append(h_att)
        post.append(h)
        outputs.append(model.output_net(h_pre))
        t_prev = t_i

    if diverged.any():
        LOG.warning("%d/%d trajectories diverged", int(diverged.sum()), batch.size)
    return ForwardTrace(
        pre=stack(pre),
        attended=stack(attended),
        post=stack(post),
        outputs=stack(outputs),
        diverged=diverged,
    )


# ── Losses & readouts ─────────────────────────────────────────────────────
def interpolation_loss(
    trace: ForwardTrace,
    targets: TimeSeriesBatch,
    exclude: np.ndarray | None = None,
) -> Tensor:
    """
    Mean squared error of ``o`` against *targets* over every target point
    with ``mask = 1``; diverged and *exclude*-flagged trajectories carry
    zero weight.
    """
    if trace.outputs.shape != targets.values.shape:
        raise ShapeError(f"outputs {trace.outputs.shape} vs targets {targets.values.shape}")
    keep = trace.valid if exclude is None else trace.valid & ~np.asarray(exclude, dtype=bool)
    weight = targets.mask * keep[None, :, None]
    total = weight.sum()
    if total == 0:
        raise LossError("no valid target points (all trajectories diverged or excluded)")
    diff = trace.outputs - Tensor(targets.values)
    return reduce("sum", diff * diff * Tensor(weight)) * (1.0 / total)


def classification_logits(model: SdeRnnModel, trace: ForwardTrace) -> Tensor:
    if model.classifier is None:
        raise ConfigError("model was built without a classifier head (n_classes = 0)")
    if model.config.readout == "mean":
        summary = reduce("mean", trace.post, axis=0)
    else:
        summary = trace.post[-1]
    return model.classifier(summary)


def cross_entropy(logits: Tensor, labels: np.ndarray, valid: np.ndarray | None = None) -> Tensor:
    """Mean ``−log softmax(logits)[label]`` over *valid* rows."""
    labels = np.asarray(labels, dtype=np.intp)
    rows = np.arange(labels.size) if valid is None else np.flatnonzero(valid)
    if rows.size == 0:
        raise LossError("no valid rows for cross-entropy")
    if labels.min() < 0 or labels.max() >= logits.shape[-1]:
        raise ShapeError(f"labels out of range for {logits.shape[-1]} classes")
    logp = log_softmax(take(logits, rows, axis=0), axis=-1)
    picked = logp[np.arange(rows.size), labels[rows]]
    return -reduce("mean", picked)


def predict(logits: Tensor | np.ndarray) -> np.ndarray:
    """Arg-max class; ties go to the lowest index."""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    return np.argmax(data, axis=-1)


def accuracy(logits: Tensor | np.ndarray, labels: np.ndarray, valid: np.ndarray | None = None) -> float:
    hits = predict(logits) == np.asarray(labels)
    if valid is not None:
        hits = hits[np.asarray(valid, dtype=bool)]
    if hits.size == 0:
        raise LossError("no valid rows for accuracy")
    return float(hits.mean())


__all__ = [
    "ModelConfig",
    "SdeRnnModel",
    "ForwardTrace",
    "forward",
    "interpolation_loss",
    "classification_logits",
    "cross_entropy",
    "predict",
    "accuracy",
    "READOUTS",
]
