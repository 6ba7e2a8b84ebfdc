"""
layers.py
~~~~~~~~~
Parameterised building blocks shared by the SDE backbone and the
attention modules: linear, MLP, GRU cell, causal LSTM encoder and
multi-head scaled dot-product self-attention.

All trainable tensors live in one :class:`ParameterStore`, addressed by
dotted names (``"drift.0.weight"``).  Each name seeds its own
initialisation stream, so adding a layer never changes how the others
are initialised.

Initialisation: ``uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))``; recurrent cells
use their hidden width as fan-in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from .constants import STREAM_INIT
from .errors import ShapeError
from .seeding import stream
from .tensor import (
    Parameter,
    Tensor,
    as_tensor,
    matmul,
    relu,
    reshape,
    sigmoid,
    softmax,
    stack,
    swapaxes,
    tanh,
    transpose,
    zeros,
)


# ── Parameter registry ────────────────────────────────────────────────────
class ParameterStore:
    """Ordered, named collection of every trainable tensor of a model."""

    def __init__(self, seed: int = 0) -> None:
        self.seed = int(seed)
        self._params: dict[str, Parameter] = {}

    def add(
        self,
        name: str,
        shape: Sequence[int],
        *,
        fan_in: int | None = None,
        init: str = "uniform",
    ) -> Parameter:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        shape = tuple(int(n) for n in shape)
        if init == "zeros":
            data = np.zeros(shape)
        elif init == "uniform":
            bound = 1.0 / math.sqrt(max(fan_in or shape[-1], 1))
            data = stream(self.seed, STREAM_INIT, name).uniform(-bound, bound, size=shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        param = Parameter(data, name=name)
        self._params[name] = param
        return param

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> list[tuple[str, Parameter]]:
        return list(self._params.items())

    def parameters(self, prefix: str = "") -> list[Parameter]:
        return [p for n, p in self._params.items() if n.startswith(prefix)]

    def num_values(self) -> int:
        return sum(p.size for p in self._params.values())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Gradient per name; parameters without one report zeros."""
        return {
            n: (p.grad if p.grad is not None else np.zeros_like(p.data))
            for n, p in self._params.items()
        }

    def fill_(self, value: float, prefix: str = "") -> None:
        """Overwrite every parameter under *prefix* with a constant."""
        for p in self.parameters(prefix):
            p.data = np.full_like(p.data, value)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in self._params.items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        unexpected = set(state) - set(self._params)
        if missing or unexpected:
            raise KeyError(
                f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}"
            )
        for name, value in state.items():
            value = np.asarray(value, dtype=np.float64)
            if value.shape != self._params[name].shape:
                raise ShapeError(
                    f"{name}: checkpoint shape {value.shape} != model shape "
                    f"{self._params[name].shape}"
                )
            self._params[name].data = value.copy()


# ── Linear / MLP ──────────────────────────────────────────────────────────
@dataclass
class LinearLayer:
    """``y = x · Wᵀ + b`` with ``W: [out, in]`` and ``b: [out]``."""

    weight: Parameter
    bias: Parameter

    @classmethod
    def create(cls, store: ParameterStore, name: str, in_features: int, out_features: int) -> "LinearLayer":
        return cls(
            weight=store.add(f"{name}.weight", (out_features, in_features), fan_in=in_features),
            bias=store.add(f"{name}.bias", (out_features,), fan_in=in_features),
        )

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def __call__(self, x: Tensor) -> Tensor:
        return linear_forward(self, x)


def linear_forward(layer: LinearLayer, x: Tensor) -> Tensor:
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[-1] != layer.in_features:
        raise ShapeError(f"linear expects trailing dim {layer.in_features}, got shape {x.shape}")
    if x.ndim == 1:
        y = linear_forward(layer, reshape(x, (1, -1)))
        return reshape(y, (layer.out_features,))
    return matmul(x, transpose(layer.weight)) + layer.bias


_ACTIVATIONS = {"tanh": tanh, "relu": relu}


@dataclass
class MlpNet:
    """Linear layers with an activation between them (none after the last)."""

    layers: list[LinearLayer]
    activation: str = "tanh"

    @classmethod
    def create(
        cls,
        store: ParameterStore,
        name: str,
        sizes: Sequence[int],
        activation: str = "tanh",
    ) -> "MlpNet":
        if len(sizes) < 2:
            raise ValueError(f"an MLP needs at least input and output sizes, got {sizes}")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        layers = [
            LinearLayer.create(store, f"{name}.{i}", n_in, n_out)
            for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:]))
        ]
        return cls(layers=layers, activation=activation)

    @property
    def in_features(self) -> int:
        return self.layers[0].in_features

    @property
    def out_features(self) -> int:
        return self.layers[-1].out_features

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def __call__(self, x: Tensor) -> Tensor:
        return mlp_forward(self, x)


def mlp_forward(net: MlpNet, x: Tensor) -> Tensor:
    act = _ACTIVATIONS[net.activation]
    out = as_tensor(x)
    for i, layer in enumerate(net.layers):
        out = linear_forward(layer, out)
        if i < len(net.layers) - 1:
            out = act(out)
    return out


# ── GRU cell ──────────────────────────────────────────────────────────────
@dataclass
class GruCellParams:
    """Gate blocks stacked in the order reset, update, candidate."""

    weight_ih: Parameter  # [3H, D]
    weight_hh: Parameter  # [3H, H]
    bias_ih: Parameter  # [3H]
    bias_hh: Parameter  # [3H]

    @classmethod
    def create(cls, store: ParameterStore, name: str, input_size: int, hidden_size: int) -> "GruCellParams":
        h3 = 3 * hidden_size
        return cls(
            weight_ih=store.add(f"{name}.weight_ih", (h3, input_size), fan_in=hidden_size),
            weight_hh=store.add(f"{name}.weight_hh", (h3, hidden_size), fan_in=hidden_size),
            bias_ih=store.add(f"{name}.bias_ih", (h3,), fan_in=hidden_size),
            bias_hh=store.add(f"{name}.bias_hh", (h3,), fan_in=hidden_size),
        )

    @property
    def hidden_size(self) -> int:
        return self.weight_hh.shape[1]

    @property
    def input_size(self) -> int:
        return self.weight_ih.shape[1]


def gru_step(p: GruCellParams, h: Tensor, x: Tensor) -> Tensor:
    """One GRU update: ``h_new = (1 − z) ⊙ h + z ⊙ n``."""
    h, x = as_tensor(h), as_tensor(x)
    hs = p.hidden_size
    if h.shape[-1] != hs or x.shape[-1] != p.input_size or h.shape[:-1] != x.shape[:-1]:
        raise ShapeError(
            f"gru_step expects h [.., {hs}] and x [.., {p.input_size}] with equal batch, "
            f"got {h.shape} and {x.shape}"
        )
    gi = matmul(x, transpose(p.weight_ih)) + p.bias_ih
    gh = matmul(h, transpose(p.weight_hh)) + p.bias_hh
    r = sigmoid(gi[..., :hs] + gh[..., :hs])
    z = sigmoid(gi[..., hs : 2 * hs] + gh[..., hs : 2 * hs])
    n = tanh(gi[..., 2 * hs :] + r * gh[..., 2 * hs :])
    return (1.0 - z) * h + z * n


# ── LSTM encoder ──────────────────────────────────────────────────────────
@dataclass
class LstmEncoderParams:
    """Unidirectional LSTM; gate blocks ordered input, forget, candidate, output."""

    weight_ih: Parameter  # [4H, D]
    weight_hh: Parameter  # [4H, H]
    bias_ih: Parameter
    bias_hh: Parameter

    @classmethod
    def create(
        cls, store: ParameterStore, name: str, input_size: int, hidden_size: int
    ) -> "LstmEncoderParams":
        h4 = 4 * hidden_size
        return cls(
            weight_ih=store.add(f"{name}.weight_ih", (h4, input_size), fan_in=hidden_size),
            weight_hh=store.add(f"{name}.weight_hh", (h4, hidden_size), fan_in=hidden_size),
            bias_ih=store.add(f"{name}.bias_ih", (h4,), fan_in=hidden_size),
            bias_hh=store.add(f"{name}.bias_hh", (h4,), fan_in=hidden_size),
        )

    @property
    def hidden_size(self) -> int:
        return self.weight_hh.shape[1]

    @property
    def input_size(self) -> int:
        return self.weight_ih.shape[1]

    def zero_state(self, batch: int) -> tuple[Tensor, Tensor]:
        return zeros(batch, self.hidden_size), zeros(batch, self.hidden_size)


def lstm_cell(
    p: LstmEncoderParams, x: Tensor, state: tuple[Tensor, Tensor]
) -> tuple[Tensor, Tensor]:
    h, c = state
    x = as_tensor(x)
    if x.shape[-1] != p.input_size:
        raise ShapeError(f"lstm expects input width {p.input_size}, got {x.shape}")
    hs = p.hidden_size
    gates = matmul(x, transpose(p.weight_ih)) + p.bias_ih + matmul(h, transpose(p.weight_hh)) + p.bias_hh
    i = sigmoid(gates[..., :hs])
    f = sigmoid(gates[..., hs : 2 * hs])
    g = tanh(gates[..., 2 * hs : 3 * hs])
    o = sigmoid(gates[..., 3 * hs :])
    c_new = f * c + i * g
    return o * tanh(c_new), c_new


def lstm_encode(p: LstmEncoderParams, seq: Tensor) -> Tensor:
    """Run the causal LSTM over ``seq: [T, B, D]`` from a zero state."""
    seq = as_tensor(seq)
    if seq.ndim != 3 or seq.shape[0] < 1:
        raise ShapeError(f"lstm_encode expects a non-empty [T, B, D] sequence, got {seq.shape}")
    state = p.zero_state(seq.shape[1])
    outputs = []
    for t in range(seq.shape[0]):
        state = lstm_cell(p, seq[t], state)
        outputs.append(state[0])
    return stack(outputs, axis=0)


# ── Multi-head self-attention ─────────────────────────────────────────────
@dataclass
class SelfAttentionParams:
    query: LinearLayer
    key: LinearLayer
    value: LinearLayer
    output: LinearLayer
    heads: int

    @classmethod
    def create(cls, store: ParameterStore, name: str, width: int, heads: int) -> "SelfAttentionParams":
        if heads < 1 or width % heads:
            raise ShapeError(f"head count {heads} must divide model width {width}")
        return cls(
            query=LinearLayer.create(store, f"{name}.query", width, width),
            key=LinearLayer.create(store, f"{name}.key", width, width),
            value=LinearLayer.create(store, f"{name}.value", width, width),
            output=LinearLayer.create(store, f"{name}.output", width, width),
            heads=heads,
        )

    @property
    def width(self) -> int:
        return self.query.in_features

    @property
    def head_width(self) -> int:
        return self.width // self.heads


def _split_heads(p: SelfAttentionParams, x: Tensor) -> Tensor:
    """``[T, B, D] → [B, heads, T, d_head]``."""
    t, b, _ = x.shape
    return transpose(reshape(x, (t, b, p.heads, p.head_width)), (1, 2, 0, 3))


def _check_width(p: SelfAttentionParams, seq: Tensor) -> None:
    if seq.ndim != 3 or seq.shape[0] < 1 or seq.shape[-1] != p.width:
        raise ShapeError(
            f"self-attention expects a non-empty [T, B, {p.width}] sequence, got {seq.shape}"
        )


def attention_weights(p: SelfAttentionParams, seq: Tensor, causal: bool = True) -> Tensor:
    """Row-stochastic weights ``[B, heads, T, T]``."""
    return _attend(p, as_tensor(seq), causal)[1]


def _attend(p: SelfAttentionParams, seq: Tensor, causal: bool) -> tuple[Tensor, Tensor]:
    _check_width(p, seq)
    t, b, d = seq.shape
    q = _split_heads(p, p.query(seq))
    k = _split_heads(p, p.key(seq))
    v = _split_heads(p, p.value(seq))
    scores = matmul(q, swapaxes(k, -1, -2)) * (1.0 / math.sqrt(p.head_width))
    mask = np.tril(np.ones((t, t), dtype=bool)) if causal else None
    weights = softmax(scores, axis=-1, where_mask=mask)
    ctx = transpose(matmul(weights, v), (2, 0, 1, 3))
    return p.output(reshape(ctx, (t, b, d))), weights


def self_attention(p: SelfAttentionParams, seq: Tensor, causal: bool = True) -> Tensor:
    """
    Scaled dot-product attention per head, heads concatenated, then the
    output projection.  ``causal`` hides keys later than the query.
    """
    return _attend(p, as_tensor(seq), causal)[0]


def attend_last(p: SelfAttentionParams, seq: Tensor) -> Tensor:
    """Last row of causal :func:`self_attention` on *seq*, shape ``[B, D]``."""
    seq = as_tensor(seq)
    _check_width(p, seq)
    _, b, d = seq.shape
    q = reshape(p.query(seq[-1]), (b, p.heads, 1, p.head_width))
    k = _split_heads(p, p.key(seq))
    v = _split_heads(p, p.value(seq))
    scores = matmul(q, swapaxes(k, -1, -2)) * (1.0 / math.sqrt(p.head_width))
    ctx = matmul(softmax(scores, axis=-1), v)
    return p.output(reshape(ctx, (b, d)))


__all__ = [
    "ParameterStore",
    "LinearLayer",
    "linear_forward",
    "MlpNet",
    "mlp_forward",
    "GruCellParams",
    "gru_step",
    "LstmEncoderParams",
    "lstm_cell",
    "lstm_encode",
    "SelfAttentionParams",
    "self_attention",
    "attend_last",
    "attention_weights",
]
