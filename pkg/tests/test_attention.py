"""
tests/test_attention.py
~~~~~~~~~~~~~~~~~~~~~~~
Static channel, time-varying feature and pyramidal attention: identities,
causality, step-wise equivalence and gradients.
"""

from __future__ import annotations

import numpy as np
import pytest

from sdeattn import tensor as T
from sdeattn.attention import (
    PyramidalAttention,
    PyramidConfig,
    StaticChannelAttention,
    StaticChannelAttnParams,
    TvfAttention,
    TvfAttnParams,
    downsample,
    pyramid_levels_for,
    pyramidal_last,
    pyramidal_transform,
    static_channel_gate,
    tvf_gate,
    tvf_gate_matrix,
    upsample_linear,
)
from sdeattn.errors import ShapeError
from sdeattn.gradcheck import max_relative_error
from sdeattn.layers import ParameterStore, self_attention
from sdeattn.tensor import Parameter, Tensor

TOL = 1e-5


@pytest.fixture
def seq(rng):
    return Tensor(rng.normal(size=(7, 3, 4)))


# ── Static channel ────────────────────────────────────────────────────────
class TestStaticChannel:
    def test_gate_is_shared_and_in_unit_interval(self, rng):
        store = ParameterStore(seed=1)
        p = StaticChannelAttnParams.create(store, "scha", 4)
        states = Tensor(rng.normal(size=(5, 4)))
        gated, gate = static_channel_gate(p, states)

        assert gate.shape == (4,)
        assert np.all((gate.data > 0) & (gate.data < 1))
        np.testing.assert_allclose(gated.data, states.data * gate.data[None, :])

    def test_gate_depends_on_batch_mean_only(self, rng):
        p = StaticChannelAttnParams.create(ParameterStore(seed=1), "scha", 4)
        states = rng.normal(size=(5, 4))
        shuffled = states[::-1].copy()

        a = static_channel_gate(p, Tensor(states))[1].data
        b = static_channel_gate(p, Tensor(shuffled))[1].data
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_gradient(self, rng):
        store = ParameterStore(seed=2)
        p = StaticChannelAttnParams.create(store, "scha", 4)
        states = Parameter(rng.normal(size=(3, 4)), "states")
        params = list(store) + [states]
        def fn():
            return T.reduce("sum", static_channel_gate(p, states)[0] ** 2)

        assert max_relative_error(fn, params) < TOL

    def test_override_replaces_computed_gate(self, rng):
        p = StaticChannelAttnParams.create(ParameterStore(seed=1), "scha", 2)
        attn = StaticChannelAttention(p, gate_override=np.array([0.0, 1.0]))
        h = Tensor(rng.normal(size=(3, 2)))
        out = attn.step(attn.start(3), h).data

        np.testing.assert_array_equal(out[:, 0], 0.0)
        np.testing.assert_array_equal(out[:, 1], h.data[:, 1])

    def test_empty_batch_rejected(self):
        p = StaticChannelAttnParams.create(ParameterStore(), "scha", 2)
        with pytest.raises(ShapeError):
            static_channel_gate(p, Tensor(np.zeros((0, 2))))


# ── Time-varying feature ──────────────────────────────────────────────────
@pytest.mark.parametrize("variant", ["lstm", "transformer"])
def test_tvf_gate_matrix_rows_equal_prefix_gates(variant, seq):
    p = TvfAttnParams.create(ParameterStore(seed=3), "tvf", 4, variant, heads=2, max_len=16)
    full = tvf_gate_matrix(p, seq).data

    assert full.shape == seq.shape
    assert np.all((full > 0) & (full < 1))
    for t in range(seq.shape[0]):
        np.testing.assert_allclose(full[t], tvf_gate(p, seq[: t + 1]).data, atol=1e-12)


@pytest.mark.parametrize("variant", ["lstm", "transformer"])
def test_tvf_stepwise_matches_gate_matrix(variant, seq):
    p = TvfAttnParams.create(ParameterStore(seed=3), "tvf", 4, variant, heads=2, max_len=16)
    attn = TvfAttention(p)
    state = attn.start(seq.shape[1])
    stepped = np.stack([attn.step(state, seq[t]).data for t in range(seq.shape[0])])

    expected = seq.data * tvf_gate_matrix(p, seq).data
    np.testing.assert_allclose(stepped, expected, atol=1e-12)
    assert attn.kind == f"tvf-{variant}"


@pytest.mark.parametrize("variant", ["lstm", "transformer"])
def test_tvf_gradient(variant, rng):
    store = ParameterStore(seed=4)
    p = TvfAttnParams.create(store, "tvf", 2, variant, heads=1, max_len=8)
    seq = Tensor(rng.normal(size=(3, 2, 2)))
    def fn():
        return T.reduce("sum", (seq * tvf_gate_matrix(p, seq)) ** 2)

    assert max_relative_error(fn, list(store)) < TOL


def test_tvf_transformer_rejects_too_long_sequence(rng):
    p = TvfAttnParams.create(ParameterStore(), "tvf", 2, "transformer", heads=1, max_len=4)
    with pytest.raises(ShapeError):
        tvf_gate_matrix(p, Tensor(rng.normal(size=(5, 1, 2))))


def test_tvf_unknown_variant():
    with pytest.raises(ValueError):
        TvfAttnParams.create(ParameterStore(), "tvf", 2, "gru")


# ── Pyramidal ─────────────────────────────────────────────────────────────
def test_downsample_stride_one_is_identity(seq):
    assert downsample(seq, 1).data.tobytes() == seq.data.tobytes()


def test_upsample_to_same_length_is_identity(seq):
    assert upsample_linear(seq, seq.shape[0]).data.tobytes() == seq.data.tobytes()


def test_downsample_keeps_every_stride_th_step(seq):
    np.testing.assert_array_equal(downsample(seq, 3).data, seq.data[[0, 3, 6]])
    with pytest.raises(ShapeError):
        downsample(seq, 0)


def test_upsample_interpolates_linearly():
    coarse = Tensor(np.array([0.0, 2.0]).reshape(2, 1, 1))
    np.testing.assert_allclose(upsample_linear(coarse, 5).data.reshape(-1), [0.0, 0.5, 1.0, 1.5, 2.0])


def test_upsample_single_step_repeats():
    one = Tensor(np.array([3.0]).reshape(1, 1, 1))
    np.testing.assert_array_equal(upsample_linear(one, 4).data.reshape(-1), [3.0] * 4)


@pytest.mark.parametrize("length, expected", [(1, 1), (2, 1), (7, 2), (8, 3), (100, 4)])
def test_pyramid_levels_for(length, expected):
    assert pyramid_levels_for(length) == expected


def test_single_level_pyramid_is_plain_self_attention(seq):
    cfg = PyramidConfig.create(ParameterStore(seed=5), "pyr", 4, 1, heads=2)
    cfg.fusion.weight.data = np.eye(4)
    cfg.fusion.bias.data = np.zeros(4)

    np.testing.assert_allclose(
        pyramidal_transform(cfg, seq).data, self_attention(cfg.levels[0], seq).data, atol=1e-12
    )


def test_pyramid_last_equals_last_row_of_transform(seq):
    cfg = PyramidConfig.create(ParameterStore(seed=5), "pyr", 4, 3, heads=2)
    for t in range(1, seq.shape[0] + 1):
        prefix = seq[:t]
        np.testing.assert_allclose(
            pyramidal_last(cfg, prefix).data, pyramidal_transform(cfg, prefix).data[-1], atol=1e-12
        )


def test_pyramidal_stepwise_uses_causal_prefix(seq):
    cfg = PyramidConfig.create(ParameterStore(seed=5), "pyr", 4, 2, heads=2)
    attn = PyramidalAttention(cfg)
    state = attn.start(seq.shape[1])
    outs = [attn.step(state, seq[t]).data for t in range(seq.shape[0])]

    for t, out in enumerate(outs):
        np.testing.assert_allclose(out, pyramidal_transform(cfg, seq[: t + 1]).data[-1], atol=1e-12)


def test_pyramidal_gradient(rng):
    store = ParameterStore(seed=6)
    cfg = PyramidConfig.create(store, "pyr", 2, 2, heads=1)
    seq = Tensor(rng.normal(size=(5, 2, 2)))
    assert max_relative_error(lambda: T.reduce("sum", pyramidal_transform(cfg, seq) ** 2), list(store)) < TOL


def test_pyramid_strides(seq):
    cfg = PyramidConfig.create(ParameterStore(), "pyr", 4, 3, heads=2, stride_base=3)
    assert cfg.strides == [1, 3, 9]
    assert pyramidal_transform(cfg, seq).shape == seq.shape
