"""Reverse-mode automatic differentiation over dense float64 arrays.

Ops execute eagerly on numpy arrays. While a :class:`ComputationRecord` is
active (used as a context manager), every op that touches a gradient-bearing
tensor appends one node to the record. :func:`backward` replays the record
once in reverse order, accumulating adjoints with ``+=`` so fan-out sums
naturally. Nothing here is lazy and there is no graph pruning beyond
"skip nodes whose output never received an adjoint".

All math is float64 end to end; finite-difference checks with h around 1e-5
are meaningful at that precision and the test suite leans on them heavily.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import erf

_LOG = logging.getLogger("evipar.autodiff")

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    """A dense float64 array plus an optional adjoint buffer.

    ``grad`` stays ``None`` until backward first writes to it. The adjoint
    always has exactly the shape of ``data``.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # operator sugar; definitions follow the op functions below
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class _Node:
    __slots__ = ("op", "inputs", "out", "fn")

    def __init__(self, op, inputs, out, fn):
        self.op = op
        self.inputs = inputs
        self.out = out
        self.fn = fn


class ComputationRecord:
    """Tape of ops in execution order.

    Execution order is already topological (inputs are created before the
    ops that consume them), so backward is a single reverse sweep. Records
    nest; ops append to the innermost active one.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "ComputationRecord":
        _RECORDS.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _RECORDS.pop()
        if popped is not self:  # pragma: no cover - misuse guard
            raise RuntimeError("computation records closed out of order")

    def __len__(self) -> int:
        return len(self.nodes)


_RECORDS: list[ComputationRecord] = []


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(op: str, inputs: tuple[Tensor, ...], out: Tensor, fn) -> Tensor:
    """Attach a backward node to the active record, if any input needs it."""
    if _RECORDS and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _RECORDS[-1].nodes.append(_Node(op, inputs, out, fn))
    return out


def backward(record: ComputationRecord, root: Tensor) -> None:
    """Accumulate d(root)/d(tensor) into ``grad`` for every tensor on the tape.

    ``root`` must be a scalar produced by ``record``. Every node is visited
    exactly once, in reverse execution order; fan-out accumulates additively.
    """
    if root.size != 1:
        raise ValueError(f"backward root must be scalar, got shape {root.shape}")
    if not any(node.out is root for node in record.nodes):
        raise ValueError("backward root was not produced by this record")
    root.grad = np.ones_like(root.data)
    for node in reversed(record.nodes):
        g = node.out.grad
        if g is None:
            continue  # not on any path to the root
        grads = node.fn(g)
        for t, gi in zip(node.inputs, grads):
            if gi is None or not t.requires_grad:
                continue
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
            t.grad += gi


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape``, undoing numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gd, sd) in enumerate(zip(g.shape, shape)) if sd == 1 and gd != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise binary ops (broadcasting, adjoints summed back)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data)

    def fn(g):
        ga = _unbroadcast(g, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(g, b.data.shape) if b.requires_grad else None
        return ga, gb

    return _emit("add", (a, b), out, fn)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data - b.data)

    def fn(g):
        ga = _unbroadcast(g, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(-g, b.data.shape) if b.requires_grad else None
        return ga, gb

    return _emit("sub", (a, b), out, fn)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data)

    def fn(g):
        ga = _unbroadcast(g * b.data, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.data.shape) if b.requires_grad else None
        return ga, gb

    return _emit("mul", (a, b), out, fn)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data / b.data)

    def fn(g):
        ga = _unbroadcast(g / b.data, a.data.shape) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)
        return ga, gb

    return _emit("div", (a, b), out, fn)


def neg(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(-a.data)

    def fn(g):
        return (-g,)

    return _emit("neg", (a,), out, fn)


# ---------------------------------------------------------------------------
# elementwise unary ops


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.exp(a.data))

    def fn(g):
        return (g * out.data,)

    return _emit("exp", (a,), out, fn)


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0.0):
        raise ValueError("log requires strictly positive inputs")
    out = Tensor(np.log(a.data))

    def fn(g):
        return (g / a.data,)

    return _emit("log", (a,), out, fn)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so neither branch exponentiates a large positive value
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(_sigmoid(a.data))

    def fn(g):
        return (g * out.data * (1.0 - out.data),)

    return _emit("sigmoid", (a,), out, fn)


def softplus(a) -> Tensor:
    """log(1 + e^x), evaluated as max(x, 0) + log1p(e^-|x|) so neither
    branch overflows."""
    a = as_tensor(a)
    x = a.data
    out = Tensor(np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x))))

    def fn(g):
        return (g * _sigmoid(x),)

    return _emit("softplus", (a,), out, fn)


def gelu(a) -> Tensor:
    """Gaussian error linear unit, exact erf form."""
    a = as_tensor(a)
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out = Tensor(x * cdf)

    def fn(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        return (g * (cdf + x * pdf),)

    return _emit("gelu", (a,), out, fn)


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values into [lo, hi]; gradient passes only where unclipped."""
    a = as_tensor(a)
    out = Tensor(np.clip(a.data, lo, hi))
    mask = (a.data >= lo) & (a.data <= hi)

    def fn(g):
        return (g * mask,)

    return _emit("clip", (a,), out, fn)


# ---------------------------------------------------------------------------
# linear algebra and shape ops


def matmul(a, b) -> Tensor:
    """Matrix product with stacked leading dims broadcast like np.matmul.

    Both operands must have rank >= 2; gradients for broadcast leading axes
    are summed back down to the operand's shape.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must have rank >= 2")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ValueError(f"matmul inner dims disagree: {a.data.shape} @ {b.data.shape}")
    out = Tensor(np.matmul(a.data, b.data))

    def fn(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, b.data.swapaxes(-1, -2)), a.data.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(a.data.swapaxes(-1, -2), g), b.data.shape)
        return ga, gb

    return _emit("matmul", (a, b), out, fn)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.reshape(shape))

    def fn(g):
        return (g.reshape(a.data.shape),)

    return _emit("reshape", (a,), out, fn)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = Tensor(np.transpose(a.data, axes))

    def fn(g):
        return (np.transpose(g, inv),)

    return _emit("transpose", (a,), out, fn)


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.ascontiguousarray(np.broadcast_to(a.data, shape)))

    def fn(g):
        return (_unbroadcast(g, a.data.shape),)

    return _emit("broadcast_to", (a,), out, fn)


def concat(tensors, axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def fn(g):
        pieces = np.split(g, splits, axis=axis)
        return tuple(p if t.requires_grad else None for t, p in zip(tensors, pieces))

    return _emit("concat", tuple(tensors), out, fn)


def slice_axis(a, axis: int, start: int, stop: int) -> Tensor:
    a = as_tensor(a)
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = Tensor(a.data[idx].copy())

    def fn(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return (full,)

    return _emit("slice_axis", (a,), out, fn)


# ---------------------------------------------------------------------------
# reductions and normalizers


def tsum(a) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    a = as_tensor(a)
    out = Tensor(a.data.sum())

    def fn(g):
        return (np.broadcast_to(g, a.data.shape),)

    return _emit("sum", (a,), out, fn)


def mean(a) -> Tensor:
    """Mean over all elements, as a scalar tensor."""
    a = as_tensor(a)
    out = Tensor(a.data.mean())
    inv_n = 1.0 / a.data.size

    def fn(g):
        return (np.broadcast_to(g * inv_n, a.data.shape),)

    return _emit("mean", (a,), out, fn)


def mean_lastdim(a) -> Tensor:
    """Mean over the last axis only; keeps the leading shape."""
    a = as_tensor(a)
    out = Tensor(a.data.mean(axis=-1))
    inv_n = 1.0 / a.data.shape[-1]

    def fn(g):
        return (np.broadcast_to((g * inv_n)[..., None], a.data.shape),)

    return _emit("mean_lastdim", (a,), out, fn)


def softmax(a) -> Tensor:
    """Softmax over the last axis, max-shifted for stability."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s)

    def fn(g):
        dot = (g * s).sum(axis=-1, keepdims=True)
        return ((g - dot) * s,)

    return _emit("softmax", (a,), out, fn)


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to zero mean / unit variance, then affine."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_sigma = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_sigma
    out = Tensor(xhat * gain.data + bias.data)

    def fn(g):
        ga = gg = gb = None
        lead = tuple(range(g.ndim - 1))
        if gain.requires_grad:
            gg = _unbroadcast(g * xhat, gain.data.shape) if lead else g * xhat
        if bias.requires_grad:
            gb = _unbroadcast(g, bias.data.shape) if lead else g.copy()
        if a.requires_grad:
            h = g * gain.data
            ga = (h - h.mean(axis=-1, keepdims=True)
                  - xhat * (h * xhat).mean(axis=-1, keepdims=True)) * inv_sigma
        return ga, gg, gb

    return _emit("layer_norm", (a, gain, bias), out, fn)
