"""
gradcheck.py
~~~~~~~~~~~~
Central finite-difference oracle for tape gradients.

``max_relative_error(fn, params)`` evaluates ``fn()`` (which must return a
scalar :class:`Tensor`) under a fresh tape, runs backward, then perturbs
every entry of every parameter by ±``step`` and compares.  The error per
parameter is ``‖g_tape − g_fd‖ / max(‖g_tape‖, ‖g_fd‖, floor)``; the
maximum over parameters is returned.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor, no_grad


def numeric_gradient(fn: Callable[[], Tensor], p: Tensor, step: float = 1e-5) -> np.ndarray:
    p.data = np.ascontiguousarray(p.data)
    grad = np.zeros_like(p.data)
    flat = p.data.reshape(-1)
    gflat = grad.reshape(-1)
    with no_grad():
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = fn().item()
            flat[k] = orig - step
            down = fn().item()
            flat[k] = orig
            gflat[k] = (up - down) / (2.0 * step)
    return grad


def tape_gradient(fn: Callable[[], Tensor], params: Sequence[Tensor]) -> list[np.ndarray]:
    with Tape() as tape:
        loss = fn()
    tape.backward(loss, params)
    return [p.grad.copy() for p in params]


def max_relative_error(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-5,
    floor: float = 1e-10,
) -> float:
    """Worst norm-relative disagreement between tape and finite differences."""
    worst = 0.0
    for p, analytic in zip(params, tape_gradient(fn, params)):
        numeric = numeric_gradient(fn, p, step)
        scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / scale))
    return worst


__all__ = ["numeric_gradient", "tape_gradient", "max_relative_error"]
