"""
optim.py
~~~~~~~~
Bias-corrected Adam and global-norm gradient clipping over named
:class:`Parameter` objects.

Moments are keyed by parameter name.  A step whose gradients contain
NaN/Inf is skipped entirely (parameters, moments and step count stay put)
and counted in ``AdamState.diverged_updates``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import ADAM_EPS, BETA1, BETA2, LEARNING_RATE
from .errors import ShapeError
from .tensor import Parameter

LOG = logging.getLogger("optim")


@dataclass
class AdamState:
    lr: float = LEARNING_RATE
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = ADAM_EPS
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    diverged_updates: int = 0


def adam_step(state: AdamState, params: Sequence[Parameter], grads: Sequence[np.ndarray]) -> bool:
    """
    One Adam update in place.

    Returns:
        ``True`` when the update was applied, ``False`` when it was skipped
        because a gradient was not finite.
    """
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    for p, g in zip(params, grads):
        if np.shape(g) != p.shape:
            raise ShapeError(f"{p.name}: gradient shape {np.shape(g)} != parameter shape {p.shape}")
    if not all(np.all(np.isfinite(g)) for g in grads):
        state.diverged_updates += 1
        LOG.warning("non-finite gradient, update %d skipped", state.step + 1)
        return False

    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for p, g in zip(params, grads):
        m = state.m.setdefault(p.name, np.zeros_like(p.data))
        v = state.v.setdefault(p.name, np.zeros_like(p.data))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data = p.data - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return True


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads))


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float) -> float:
    """
    Rescale *grads* in place so their joint L2 norm is at most *max_norm*.

    Returns the norm before clipping.
    """
    norm = global_norm(grads)
    if max_norm > 0 and math.isfinite(norm) and norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


__all__ = ["AdamState", "adam_step", "global_norm", "clip_grad_norm"]
