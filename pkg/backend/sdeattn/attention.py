"""
attention.py
~~~~~~~~~~~~
Latent-space attention applied to the pre-RNN state ``h'_i`` before the
GRU assimilates observation ``i``.

Kinds
-----
* ``static-channel``  – one sigmoid gate per latent channel, computed from
  the batch-mean state at the current step and shared by the batch.
* ``tvf-lstm`` / ``tvf-transformer`` – a temporal encoder over the causal
  prefix ``h'_1..h'_i`` emits a per-feature sigmoid gate for step ``i``.
* ``pyramidal`` – multi-scale transform: strided downsampling, causal
  self-attention per scale, linear upsampling, linear fusion.

Causality
---------
The GRU recursion makes ``h'_i`` depend on the attended ``h̃'_{i-1}``, so
every sequence-consuming module only ever sees the prefix ending at the
current step.  The stateful ``*Attention`` classes at the bottom compute
exactly what the standalone functions compute on that prefix, one step at
a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Protocol

import numpy as np

from .constants import MAX_PYRAMID_LEVELS
from .errors import ShapeError
from .layers import (
    LinearLayer,
    LstmEncoderParams,
    ParameterStore,
    SelfAttentionParams,
    attend_last,
    lstm_cell,
    lstm_encode,
    self_attention,
)
from .tensor import Parameter, Tensor, as_tensor, concat, reduce, relu, sigmoid, slice_time, stack, take

GateMatrix = Tensor
"""``[T, B, D]`` gates with entries in ``[0, 1]``."""


# ── Static channel attention ──────────────────────────────────────────────
@dataclass
class StaticChannelAttnParams:
    squeeze: LinearLayer  # H -> H / r
    excite: LinearLayer  # H / r -> H

    @classmethod
    def create(
        cls, store: ParameterStore, name: str, width: int, reduction: int = 2
    ) -> "StaticChannelAttnParams":
        inner = max(1, width // max(1, reduction))
        return cls(
            squeeze=LinearLayer.create(store, f"{name}.squeeze", width, inner),
            excite=LinearLayer.create(store, f"{name}.excite", inner, width),
        )


def static_channel_gate(p: StaticChannelAttnParams, states: Tensor) -> tuple[Tensor, Tensor]:
    """
    Gate ``[H]`` from the batch-mean state, applied to every row.

    Returns:
        ``(gated [B, H], gate [H])``.
    """
    states = as_tensor(states)
    if states.ndim != 2 or states.shape[0] < 1:
        raise ShapeError(f"static channel attention needs a non-empty [B, H] batch, got {states.shape}")
    summary = reduce("mean", states, axis=0)
    gate = sigmoid(p.excite(relu(p.squeeze(summary))))
    return states * gate, gate


# ── Time-varying feature attention ────────────────────────────────────────
@dataclass
class TvfAttnParams:
    variant: str  # "lstm" | "transformer"
    head: LinearLayer
    lstm: LstmEncoderParams | None = None
    encoder: SelfAttentionParams | None = None
    positions: Parameter | None = None  # [max_len, D]

    @classmethod
    def create(
        cls,
        store: ParameterStore,
        name: str,
        width: int,
        variant: str,
        *,
        heads: int = 2,
        max_len: int = 1024,
    ) -> "TvfAttnParams":
        if variant == "lstm":
            return cls(
                variant=variant,
                lstm=LstmEncoderParams.create(store, f"{name}.lstm", width, width),
                head=LinearLayer.create(store, f"{name}.head", width, width),
            )
        if variant == "transformer":
            return cls(
                variant=variant,
                encoder=SelfAttentionParams.create(store, f"{name}.encoder", width, heads),
                positions=store.add(f"{name}.positions", (max_len, width), fan_in=width),
                head=LinearLayer.create(store, f"{name}.head", width, width),
            )
        raise ValueError(f"unknown TVF variant {variant!r}")

    @property
    def max_len(self) -> int:
        return self.positions.shape[0] if self.positions is not None else 2**31


def _with_positions(p: TvfAttnParams, seq: Tensor) -> Tensor:
    t = seq.shape[0]
    if t > p.max_len:
        raise ShapeError(f"sequence length {t} exceeds the positional table ({p.max_len})")
    pos = slice_time(p.positions, np.arange(t))
    return seq + pos.reshape(t, 1, pos.shape[-1])


def tvf_gate(p: TvfAttnParams, prefix: Tensor) -> Tensor:
    """Gate row ``[B, H]`` for the last step of the causal *prefix* ``[t, B, H]``."""
    prefix = as_tensor(prefix)
    if prefix.ndim != 3 or prefix.shape[0] < 1:
        raise ShapeError(f"tvf_gate needs a non-empty [t, B, H] prefix, got {prefix.shape}")
    if p.variant == "lstm":
        enc = lstm_encode(p.lstm, prefix)[-1]
    else:
        z = _with_positions(p, prefix)
        enc = z[-1] + attend_last(p.encoder, z)
    return sigmoid(p.head(enc))


def tvf_gate_matrix(p: TvfAttnParams, seq: Tensor) -> GateMatrix:
    """All gates at once: row ``t`` equals ``tvf_gate(p, seq[:t+1])``."""
    seq = as_tensor(seq)
    if seq.ndim != 3 or seq.shape[0] < 1:
        raise ShapeError(f"tvf_gate_matrix needs a non-empty [T, B, H] sequence, got {seq.shape}")
    if p.variant == "lstm":
        enc = lstm_encode(p.lstm, seq)
    else:
        z = _with_positions(p, seq)
        enc = z + self_attention(p.encoder, z, causal=True)
    return sigmoid(p.head(enc))


# ── Pyramidal attention ───────────────────────────────────────────────────
def downsample(seq: Tensor, stride: int) -> Tensor:
    """Keep time steps ``0, s, 2s, …``."""
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    seq = as_tensor(seq)
    return slice_time(seq, np.arange(0, seq.shape[0], stride))


def upsample_linear(seq: Tensor, target: int) -> Tensor:
    """Linear interpolation on a uniform index grid; endpoints map to endpoints."""
    seq = as_tensor(seq)
    if target < 1:
        raise ShapeError(f"target length must be >= 1, got {target}")
    src = seq.shape[0]
    if src < 1:
        raise ShapeError("cannot upsample an empty sequence")
    if src == 1 or target == 1:
        return slice_time(seq, np.zeros(target, dtype=np.intp))
    pos = np.arange(target) * (src - 1) / (target - 1)
    lo = np.minimum(np.floor(pos).astype(np.intp), src - 1)
    hi = np.minimum(lo + 1, src - 1)
    w = (pos - lo).reshape((target,) + (1,) * (seq.ndim - 1))
    return take(seq, lo) * Tensor(1.0 - w) + take(seq, hi) * Tensor(w)


def pyramid_levels_for(length: int, cap: int = MAX_PYRAMID_LEVELS) -> int:
    """``floor(log2(T))`` capped at *cap*, at least 1."""
    return max(1, min(cap, int(math.floor(math.log2(max(length, 1))))))


@dataclass
class PyramidConfig:
    levels: list[SelfAttentionParams]
    fusion: LinearLayer  # L·D -> D
    stride_base: int = 2

    @classmethod
    def create(
        cls,
        store: ParameterStore,
        name: str,
        width: int,
        n_levels: int,
        *,
        heads: int = 2,
        stride_base: int = 2,
    ) -> "PyramidConfig":
        if n_levels < 1:
            raise ValueError(f"a pyramid needs at least one level, got {n_levels}")
        return cls(
            levels=[
                SelfAttentionParams.create(store, f"{name}.level{i}", width, heads)
                for i in range(n_levels)
            ],
            fusion=LinearLayer.create(store, f"{name}.fusion", n_levels * width, width),
            stride_base=stride_base,
        )

    @property
    def strides(self) -> list[int]:
        return [self.stride_base**i for i in range(len(self.levels))]


def pyramidal_transform(cfg: PyramidConfig, seq: Tensor) -> Tensor:
    """Multi-scale causal attention; output shape equals input shape."""
    seq = as_tensor(seq)
    if seq.ndim != 3 or seq.shape[0] < 1:
        raise ShapeError(f"pyramidal_transform needs a non-empty [T, B, D] sequence, got {seq.shape}")
    length = seq.shape[0]
    scales = [
        upsample_linear(self_attention(level, downsample(seq, s), causal=True), length)
        for level, s in zip(cfg.levels, cfg.strides)
    ]
    return cfg.fusion(concat(scales, axis=-1))


def pyramidal_last(cfg: PyramidConfig, prefix: Tensor) -> Tensor:
    """Last row of :func:`pyramidal_transform` on *prefix*, ``[B, D]``."""
    prefix = as_tensor(prefix)
    if prefix.ndim != 3 or prefix.shape[0] < 1:
        raise ShapeError(f"pyramidal_last needs a non-empty [t, B, D] prefix, got {prefix.shape}")
    # the upsampled last row is the last kept row of each scale
    scales = [attend_last(level, downsample(prefix, s)) for level, s in zip(cfg.levels, cfg.strides)]
    return cfg.fusion(concat(scales, axis=-1))


# ── Per-step attention used by the recurrent model ────────────────────────
class LatentAttention(Protocol):
    kind: str

    def start(self, batch: int) -> Any: ...

    def step(self, state: Any, h_pre: Tensor) -> Tensor: ...


class NoAttention:
    kind = "none"

    def start(self, batch: int) -> None:
        return None

    def step(self, state: None, h_pre: Tensor) -> Tensor:
        return h_pre


@dataclass
class StaticChannelAttention:
    params: StaticChannelAttnParams
    gate_override: np.ndarray | None = None
    kind: str = "static-channel"

    def start(self, batch: int) -> None:
        return None

    def step(self, state: None, h_pre: Tensor) -> Tensor:
        if self.gate_override is not None:
            return h_pre * Tensor(self.gate_override)
        return static_channel_gate(self.params, h_pre)[0]


@dataclass
class _Prefix:
    rows: list[Tensor] = field(default_factory=list)
    lstm: tuple[Tensor, Tensor] | None = None


@dataclass
class TvfAttention:
    params: TvfAttnParams

    @property
    def kind(self) -> str:
        return f"tvf-{self.params.variant}"

    def start(self, batch: int) -> _Prefix:
        if self.params.variant == "lstm":
            return _Prefix(lstm=self.params.lstm.zero_state(batch))
        return _Prefix()

    def step(self, state: _Prefix, h_pre: Tensor) -> Tensor:
        p = self.params
        if p.variant == "lstm":
            state.lstm = lstm_cell(p.lstm, h_pre, state.lstm)
            gate = sigmoid(p.head(state.lstm[0]))
        else:
            state.rows.append(h_pre)
            gate = tvf_gate(p, stack(state.rows, axis=0))
        return h_pre * gate


@dataclass
class PyramidalAttention:
    config: PyramidConfig
    kind: str = "pyramidal"

    def start(self, batch: int) -> _Prefix:
        return _Prefix()

    def step(self, state: _Prefix, h_pre: Tensor) -> Tensor:
        state.rows.append(h_pre)
        return pyramidal_last(self.config, stack(state.rows, axis=0))


__all__ = [
    "GateMatrix",
    "StaticChannelAttnParams",
    "static_channel_gate",
    "TvfAttnParams",
    "tvf_gate",
    "tvf_gate_matrix",
    "downsample",
    "upsample_linear",
    "pyramid_levels_for",
    "PyramidConfig",
    "pyramidal_transform",
    "pyramidal_last",
    "LatentAttention",
    "NoAttention",
    "StaticChannelAttention",
    "TvfAttention",
    "PyramidalAttention",
]
