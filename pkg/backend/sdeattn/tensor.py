"""
tensor.py
~~~~~~~~~
Dense 64-bit arrays with tape-based reverse-mode differentiation.

Every numeric object in the package is a :class:`Tensor` wrapping a
``float64`` numpy array.  While a :class:`Tape` is active, each op below
appends one node (op kind, input node-ids, a vector-Jacobian closure over
the saved forward values).  ``tape.backward(loss, params)`` replays the
tape once in reverse and leaves ∂loss/∂p in ``p.grad``.

Usage example
-------------
>>> w = Parameter(np.ones(3), name="w")
>>> with Tape() as tape:
...     loss = reduce("sum", w * w)
>>> tape.backward(loss, [w])
>>> w.grad
array([2., 2., 2.])

Notes
-----
* Broadcasting follows numpy's trailing-dimension rules; an impossible
  pair raises :class:`ShapeError` naming both shapes.
* With ``SDEATTN_DEBUG=1`` every forward op checks its output and raises
  :class:`NonFiniteError`; otherwise non-finite values travel on and the
  training loop's divergence accounting deals with them.
* One tape is one single-threaded unit of work.  The active tape lives in
  a :class:`contextvars.ContextVar`, so independent tapes in different
  threads never see each other.
"""

from __future__ import annotations

import contextlib
import os
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import NonFiniteError, ShapeError, TapeError

Array = np.ndarray
VJP = Callable[[Array], Sequence["Array | None"]]

DEBUG_FINITE = os.getenv("SDEATTN_DEBUG", "0").strip() in {"1", "true", "yes"}

_ACTIVE: ContextVar["Tape | None"] = ContextVar("sdeattn_active_tape", default=None)


# ── Tape ──────────────────────────────────────────────────────────────────
@dataclass(slots=True)
class _Node:
    kind: str
    inputs: tuple[int | None, ...]
    vjp: VJP | None


class Tape:
    """
    Ordered record of differentiable operations.

    Nodes are appended as ops run, so the list is topologically sorted by
    construction.  Leaves (``requires_grad`` tensors such as parameters)
    get a node the first time an op on this tape consumes them.
    """

    def __init__(self) -> None:
        self.nodes: list[_Node] = []
        self.active = False
        self._leaf_ids: dict[int, int] = {}
        self._leaves: dict[int, Tensor] = {}
        self._consumed = False
        self._tokens: list[Any] = []

    def __enter__(self) -> "Tape":
        if self._consumed:
            raise TapeError("tape already ran backward; call reset() before reuse")
        self._tokens.append(_ACTIVE.set(self))
        self.active = True
        return self

    def __exit__(self, *exc: object) -> None:
        _ACTIVE.reset(self._tokens.pop())
        self.active = bool(self._tokens)

    def __len__(self) -> int:
        return len(self.nodes)

    def reset(self) -> None:
        """Forget every node so the tape can record a fresh computation."""
        self.nodes.clear()
        self._leaf_ids.clear()
        self._leaves.clear()
        self._consumed = False

    def _ref(self, t: "Tensor") -> int | None:
        if t._tape is self:
            return t.node
        if not t.requires_grad:
            return None
        nid = self._leaf_ids.get(id(t))
        if nid is None:
            nid = len(self.nodes)
            self.nodes.append(_Node("leaf", (), None))
            self._leaf_ids[id(t)] = nid
            self._leaves[nid] = t
        return nid

    def record(self, kind: str, inputs: tuple[int | None, ...], vjp: VJP) -> int:
        self.nodes.append(_Node(kind, inputs, vjp))
        return len(self.nodes) - 1

    def backward(self, loss: "Tensor", params: Iterable["Tensor"] = ()) -> None:
        """
        Fill ``grad`` of every leaf reachable from *loss*.

        Args:
            loss:    Scalar tensor recorded on this tape.
            params:  Tensors that must end up with a gradient even when the
                     loss does not depend on them (they get exact zeros).

        Raises:
            TapeError: non-scalar loss, loss from another tape, or a second
                       backward without :meth:`reset`.
        """
        if self._consumed:
            raise TapeError("backward called twice on the same tape without reset()")
        if loss.size != 1:
            raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss._tape is not None and loss._tape is not self:
            raise TapeError("loss was recorded on a different tape")
        self._consumed = True

        for p in params:
            p.grad = np.zeros_like(p.data)
        for leaf in self._leaves.values():
            leaf.grad = np.zeros_like(leaf.data)
        if loss.node is None:
            return

        grads: list[Array | None] = [None] * len(self.nodes)
        grads[loss.node] = np.ones_like(loss.data)
        for nid in range(loss.node, -1, -1):
            g = grads[nid]
            node = self.nodes[nid]
            if g is None or node.vjp is None:
                continue
            for inp, gi in zip(node.inputs, node.vjp(g)):
                if inp is None or gi is None:
                    continue
                grads[inp] = gi if grads[inp] is None else grads[inp] + gi
            if nid not in self._leaves:
                grads[nid] = None

        for nid, leaf in self._leaves.items():
            if grads[nid] is not None:
                leaf.grad = np.asarray(grads[nid], dtype=np.float64).reshape(leaf.shape)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Suspend recording (evaluation passes)."""
    token = _ACTIVE.set(None)
    try:
        yield
    finally:
        _ACTIVE.reset(token)


# ── Tensor ────────────────────────────────────────────────────────────────
class Tensor:
    """Row-major float64 array plus an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "node", "_tape", "name")
    __array_priority__ = 100

    def __init__(
        self,
        data: Any,
        *,
        requires_grad: bool = False,
        name: str | None = None,
    ) -> None:
        self.data: Array = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self.node: int | None = None
        self._tape: Tape | None = None
        self.name = name

    # -- introspection ------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __len__(self) -> int:
        return self.data.shape[0]

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> Array:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, data={np.array2string(self.data, precision=4)})"

    # -- operators ------------------------------------------------------------
    def __add__(self, other: Any) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: Any) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: Any) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)

    def __matmul__(self, other: Any) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        return getitem(self, index)

    # -- method sugar -------------------------------------------------------
    def sum(self, axis: int | None = None, keepdims: bool = False) -> "Tensor":
        return reduce("sum", self, axis, keepdims)

    def mean(self, axis: int | None = None, keepdims: bool = False) -> "Tensor":
        return reduce("mean", self, axis, keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        return transpose(self, axes or None)

    def tanh(self) -> "Tensor":
        return tanh(self)

    def sigmoid(self) -> "Tensor":
        return sigmoid(self)


class Parameter(Tensor):
    """Trainable leaf: always ``requires_grad`` and always named."""

    __slots__ = ()

    def __init__(self, data: Any, name: str) -> None:
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def as_tensor(x: Any) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def zeros(*shape: int) -> Tensor:
    return Tensor(np.zeros(shape))


def ones_like(t: Tensor) -> Tensor:
    return Tensor(np.ones_like(t.data))


# ── Recording helpers ─────────────────────────────────────────────────────
def _finish(kind: str, out: Array, inputs: Sequence[Tensor], vjp: VJP) -> Tensor:
    if DEBUG_FINITE and not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{kind} produced non-finite values (shape {out.shape})")
    result = Tensor(out)
    tape = _ACTIVE.get()
    if tape is not None and tape.active:
        refs = tuple(tape._ref(t) for t in inputs)
        if any(r is not None for r in refs):
            result.node = tape.record(kind, refs, vjp)
            result._tape = tape
    return result


def _broadcast_shape(a: tuple[int, ...], b: tuple[int, ...], kind: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise ShapeError(f"{kind}: cannot broadcast shapes {a} and {b}") from None


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum *g* down to *shape* (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    if lead > 0:
        g = g.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _times(g: Array, d: Array) -> Array:
    """``g * d`` where a zero cotangent stays zero even against inf/NaN partials."""
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        return np.where(g == 0.0, 0.0, g * d)


def _axis(axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"axis {axis} out of range for {ndim}-D tensor")
    return axis % ndim


# ── Elementwise ───────────────────────────────────────────────────────────
def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape, "add")
    sa, sb = a.shape, b.shape
    return _finish(
        "add", a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb))
    )


def sub(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape, "sub")
    sa, sb = a.shape, b.shape
    return _finish(
        "sub", a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb))
    )


def mul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape, "mul")
    ad, bd = a.data, b.data
    return _finish(
        "mul",
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(_times(g, bd), ad.shape), _unbroadcast(_times(g, ad), bd.shape)),
    )


def div(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape, "div")
    ad, bd = a.data, b.data

    def vjp(g: Array) -> tuple[Array, Array]:
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            inv = 1.0 / bd
            return (
                _unbroadcast(_times(g, inv), ad.shape),
                _unbroadcast(_times(-g, ad * inv * inv), bd.shape),
            )

    return _finish("div", ad / bd, (a, b), vjp)


def neg(a: Any) -> Tensor:
    a = as_tensor(a)
    return _finish("neg", -a.data, (a,), lambda g: (-g,))


def power(a: Any, exponent: float) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    p = float(exponent)
    return _finish("pow", ad**p, (a,), lambda g: (_times(g, p * ad ** (p - 1.0)),))


def exp(a: Any) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _finish("exp", out, (a,), lambda g: (_times(g, out),))


def log(a: Any) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _finish("log", np.log(ad), (a,), lambda g: (_times(g, 1.0 / ad),))


def sqrt(a: Any) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _finish("sqrt", out, (a,), lambda g: (_times(g, 0.5 / out),))


def tanh(a: Any) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _finish("tanh", out, (a,), lambda g: (_times(g, 1.0 - out * out),))


def sigmoid(a: Any) -> Tensor:
    a = as_tensor(a)
    # tanh form is overflow-free and gives exactly 0.5 at 0
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _finish("sigmoid", out, (a,), lambda g: (_times(g, out * (1.0 - out)),))


def relu(a: Any) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _finish("relu", np.maximum(ad, 0.0), (a,), lambda g: (g * (ad > 0.0),))


_BINARY: dict[str, Callable[[Any, Any], Tensor]] = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
}
_UNARY: dict[str, Callable[[Any], Tensor]] = {
    "neg": neg,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "relu": relu,
}


def elementwise(op_kind: str, a: Any, b: Any = None) -> Tensor:
    """Dispatch an elementwise op by name (``"add"``, ``"sigmoid"`` …)."""
    if op_kind in _BINARY:
        if b is None:
            raise ShapeError(f"{op_kind} needs two operands")
        return _BINARY[op_kind](a, b)
    if op_kind in _UNARY:
        return _UNARY[op_kind](a)
    raise ValueError(f"unknown elementwise op {op_kind!r}")


def where(cond: Array, a: Any, fill: float = 0.0) -> Tensor:
    """``cond ? a : fill``; no gradient flows to the filled positions."""
    a = as_tensor(a)
    cond = np.asarray(cond, dtype=bool)
    _broadcast_shape(cond.shape, a.shape, "where")
    sa = a.shape
    out = np.where(cond, a.data, fill)
    return _finish("where", out, (a,), lambda g: (_unbroadcast(np.where(cond, g, 0.0), sa),))


# ── Contractions & shape ops ──────────────────────────────────────────────
def matmul(a: Any, b: Any) -> Tensor:
    """Batched ``a @ b`` over ``[.., m, k] · [.., k, n]``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs operands of rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    _broadcast_shape(a.shape[:-2], b.shape[:-2], "matmul")
    ad, bd = a.data, b.data

    def vjp(g: Array) -> tuple[Array, Array]:
        ga = np.matmul(g, np.swapaxes(bd, -1, -2))
        gb = np.matmul(np.swapaxes(ad, -1, -2), g)
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return _finish("matmul", np.matmul(ad, bd), (a, b), vjp)


def transpose(a: Any, axes: Sequence[int] | None = None) -> Tensor:
    a = as_tensor(a)
    perm = tuple(range(a.ndim))[::-1] if axes is None else tuple(_axis(x, a.ndim) for x in axes)
    if sorted(perm) != list(range(a.ndim)):
        raise ShapeError(f"transpose axes {axes} are not a permutation for shape {a.shape}")
    inverse = tuple(np.argsort(perm))
    return _finish("transpose", np.transpose(a.data, perm), (a,), lambda g: (np.transpose(g, inverse),))


def swapaxes(a: Any, i: int, j: int) -> Tensor:
    a = as_tensor(a)
    perm = list(range(a.ndim))
    i, j = _axis(i, a.ndim), _axis(j, a.ndim)
    perm[i], perm[j] = perm[j], perm[i]
    return transpose(a, perm)


def reshape(a: Any, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    orig = a.shape
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError(f"cannot reshape {orig} into {tuple(shape)}") from None
    return _finish("reshape", out, (a,), lambda g: (g.reshape(orig),))


def _is_basic(index: Any) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(p is Ellipsis or p is None or isinstance(p, (int, np.integer, slice)) for p in parts)


def getitem(a: Any, index: Any) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data[index]
    except IndexError as exc:
        raise ShapeError(f"index {index!r} invalid for shape {a.shape}: {exc}") from None
    shape = a.shape
    basic = _is_basic(index)

    def vjp(g: Array) -> tuple[Array]:
        gz = np.zeros(shape)
        if basic:
            gz[index] += g
        else:
            np.add.at(gz, index, g)
        return (gz,)

    return _finish("getitem", np.array(out, dtype=np.float64), (a,), vjp)


def take(a: Any, indices: Sequence[int] | Array, axis: int = 0) -> Tensor:
    """Gather along *axis*; repeated indices accumulate their gradients."""
    a = as_tensor(a)
    ax = _axis(axis, a.ndim)
    idx = np.asarray(indices, dtype=np.intp).reshape(-1)
    n = a.shape[ax]
    if idx.size and (idx.min() < -n or idx.max() >= n):
        raise ShapeError(f"indices out of range [0, {n}) along axis {axis} of {a.shape}")
    shape = a.shape

    def vjp(g: Array) -> tuple[Array]:
        gz = np.zeros(shape)
        np.add.at(np.moveaxis(gz, ax, 0), idx, np.moveaxis(g, ax, 0))
        return (gz,)

    return _finish("take", np.take(a.data, idx, axis=ax), (a,), vjp)


def slice_time(seq: Any, indices: Sequence[int] | Array) -> Tensor:
    """Select time steps (axis 0) of a ``[T, ..]`` sequence."""
    return take(seq, indices, axis=0)


def concat(tensors: Sequence[Any], axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat of an empty list")
    ax = _axis(axis, ts[0].ndim)
    ref = ts[0].shape
    for t in ts[1:]:
        if t.ndim != len(ref) or any(
            t.shape[d] != ref[d] for d in range(len(ref)) if d != ax
        ):
            raise ShapeError(f"concat along axis {axis}: shapes {ref} and {t.shape} differ")
    cuts = np.cumsum([t.shape[ax] for t in ts])[:-1]
    out = np.concatenate([t.data for t in ts], axis=ax)
    return _finish("concat", out, ts, lambda g: tuple(np.split(g, cuts, axis=ax)))


def stack(tensors: Sequence[Any], axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("stack of an empty list")
    ref = ts[0].shape
    for t in ts[1:]:
        if t.shape != ref:
            raise ShapeError(f"stack: shapes {ref} and {t.shape} differ")
    ax = _axis(axis, len(ref) + 1)
    out = np.stack([t.data for t in ts], axis=ax)
    return _finish(
        "stack", out, ts, lambda g: tuple(np.take(g, i, axis=ax) for i in range(len(ts)))
    )


# ── Reductions ────────────────────────────────────────────────────────────
def reduce(op: str, a: Any, axis: int | None = None, keepdims: bool = False) -> Tensor:
    """``op`` ∈ {"sum", "mean", "max"} over *axis* (``None`` = all)."""
    a = as_tensor(a)
    ad = a.data
    ax = None if axis is None else _axis(axis, a.ndim)
    shape = a.shape
    count = ad.size if ax is None else shape[ax]

    def expand(g: Array) -> Array:
        if ax is not None and not keepdims:
            g = np.expand_dims(g, ax)
        return np.broadcast_to(g, shape)

    if op == "sum":
        out = ad.sum(axis=ax, keepdims=keepdims)
        return _finish("sum", out, (a,), lambda g: (expand(g).copy(),))
    if op == "mean":
        out = ad.mean(axis=ax, keepdims=keepdims)
        return _finish("mean", out, (a,), lambda g: (expand(g) / count,))
    if op == "max":
        out = ad.max(axis=ax, keepdims=keepdims)
        hit = ad == (ad.max(axis=ax, keepdims=True))
        share = hit / hit.sum(axis=ax, keepdims=True)
        return _finish("max", out, (a,), lambda g: (expand(g) * share,))
    raise ValueError(f"unknown reduction {op!r}")


def softmax(x: Any, axis: int = -1, where_mask: Array | None = None) -> Tensor:
    """
    Numerically stable softmax along *axis*.

    ``where_mask`` (broadcastable to *x*) marks the admissible entries;
    excluded entries get weight exactly 0.  Every slice must keep at
    least one admissible entry.
    """
    x = as_tensor(x)
    ax = _axis(axis, x.ndim)
    xd = x.data
    if where_mask is None:
        z = xd - xd.max(axis=ax, keepdims=True)
        e = np.exp(z)
    else:
        allowed = np.broadcast_to(np.asarray(where_mask, dtype=bool), xd.shape)
        if not np.all(allowed.any(axis=ax)):
            raise ShapeError("softmax: a slice has no admissible entries")
        m = np.where(allowed, xd, -np.inf).max(axis=ax, keepdims=True)
        e = np.exp(np.where(allowed, xd - m, -np.inf))
    s = e / e.sum(axis=ax, keepdims=True)
    return _finish("softmax", s, (x,), lambda g: (s * (g - (g * s).sum(axis=ax, keepdims=True)),))


def log_softmax(x: Any, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    ax = _axis(axis, x.ndim)
    z = x.data - x.data.max(axis=ax, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=ax, keepdims=True))
    prob = np.exp(out)
    return _finish(
        "log_softmax", out, (x,), lambda g: (g - prob * g.sum(axis=ax, keepdims=True),)
    )


__all__ = [
    "Tape",
    "Tensor",
    "Parameter",
    "no_grad",
    "as_tensor",
    "zeros",
    "ones_like",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "exp",
    "log",
    "sqrt",
    "tanh",
    "sigmoid",
    "relu",
    "elementwise",
    "where",
    "matmul",
    "transpose",
    "swapaxes",
    "reshape",
    "getitem",
    "take",
    "slice_time",
    "concat",
    "stack",
    "reduce",
    "softmax",
    "log_softmax",
]
