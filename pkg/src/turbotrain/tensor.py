"""Minimal dense tensor with reverse-mode automatic differentiation.

Data lives in row-major numpy buffers, float32 by default with a float64
mode (see :func:`precision`) used by the finite-difference gradient suite.
Gradients accumulate into ``.grad`` until an explicit ``zero_grad``;
repeated ``backward`` calls therefore add up, which is the documented
contract (supports micro-batching).
"""

from __future__ import annotations

import contextlib
import math

import numpy as np

from . import kernels
from .errors import DomainError, GraphError, ShapeMismatch

_default_dtype = np.float32


def default_dtype():
    return _default_dtype


def set_default_dtype(dtype):
    global _default_dtype
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be float32 or float64")
    _default_dtype = dtype


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the default storage dtype (float64 for gradcheck)."""
    global _default_dtype
    prev = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _default_dtype = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, _op="leaf"):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(_default_dtype)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        # constants with no differentiable ancestry are pruned from the graph
        self._parents = _parents if requires_grad else ()
        self._backward = _backward if requires_grad else None
        self._op = _op

    # -- introspection ------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def finite_check(self):
        """True iff data (and grad, when present) contain no NaN/Inf."""
        ok = bool(np.isfinite(self.data).all())
        if ok and self.grad is not None:
            ok = bool(np.isfinite(self.grad).all())
        return ok

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    # -- autodiff -----------------------------------------------------------

    def _accumulate(self, grad):
        # first accumulation adopts the buffer without copying; later ones
        # add out-of-place, so shared gradient buffers are never mutated.
        # Views are copied on adopt so .grad never aliases another buffer.
        if self.grad is None:
            self.grad = grad.copy() if grad.base is not None else grad
        else:
            self.grad = self.grad + grad

    def backward(self):
        """Reverse-mode sweep from a scalar loss; populates leaf .grad."""
        if self.data.size != 1:
            raise GraphError(f"backward requires a scalar loss, got shape {self.shape}")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def reshape(self, *shape):
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)


def as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=_default_dtype))


def _unbroadcast(grad, shape):
    """Sum grad over axes that were broadcast to reach `grad.shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


def _binary(a, b, out_data, da_fn, db_fn, op):
    needs = a.requires_grad or b.requires_grad

    def backward(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(da_fn(grad), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(db_fn(grad), b.shape))

    return Tensor(out_data, needs, (a, b), backward, op)


def _unary(a, out_data, da_fn, op):
    def backward(grad):
        if a.requires_grad:
            a._accumulate(da_fn(grad))

    return Tensor(out_data, a.requires_grad, (a,), backward, op)


# ---------------------------------------------------------------------------
# elementwise ops
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    # the second parent copies when no reduction will run, so two leaves
    # never end up sharing one gradient buffer
    return _binary(a, b, a.data + b.data, lambda g: g,
                   lambda g: g.copy() if g.shape == b.shape else g, "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.data - b.data, lambda g: g, lambda g: -g, "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, a.data * b.data, lambda g: g * b.data, lambda g: g * a.data, "mul")


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _binary(
        a, b, a.data / b.data,
        lambda g: g / b.data,
        lambda g: -g * a.data / (b.data * b.data),
        "div",
    )


def scale(a, s):
    a = as_tensor(a)
    s = float(s)
    return _unary(a, a.data * s, lambda g: g * s, "scale")


def gelu(a):
    a = as_tensor(a)
    x = a.data
    return _unary(a, kernels.gelu(x), lambda g: g * kernels.gelu_grad(x), "gelu")


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _unary(a, out, lambda g: g * out, "exp")


def log(a):
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError("log requires strictly positive input")
    return _unary(a, np.log(a.data), lambda g: g / a.data, "log")


def sqrt(a):
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise DomainError("sqrt requires non-negative input")
    out = np.sqrt(a.data)
    return _unary(a, out, lambda g: g * 0.5 / np.maximum(out, 1e-30), "sqrt")


# ---------------------------------------------------------------------------
# matmul
# ---------------------------------------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatch(f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul inner extents disagree: {a.shape} vs {b.shape}")
    out = np.matmul(a.data, b.data)

    def da(g):
        if b.ndim == 2 and g.ndim > 2:
            # collapse leading axes into one GEMM instead of a batched matmul
            flat = np.matmul(g.reshape(-1, g.shape[-1]), b.data.T)
            return flat.reshape(a.shape)
        return np.matmul(g, b.data.swapaxes(-1, -2))

    def db(g):
        return np.matmul(a.data.swapaxes(-1, -2), g)

    return _binary(a, b, out, da, db, "matmul")


# ---------------------------------------------------------------------------
# softmax / layernorm
# ---------------------------------------------------------------------------

def softmax(a, axis=-1):
    a = as_tensor(a)
    x = a.data
    if axis != -1 and axis != x.ndim - 1:
        moved = np.moveaxis(x, axis, -1)
    else:
        moved = x
    flat = np.ascontiguousarray(moved.reshape(-1, moved.shape[-1]))
    y_flat = kernels.softmax2d(flat)
    y = y_flat.reshape(moved.shape)
    if axis != -1 and axis != x.ndim - 1:
        y = np.moveaxis(y, -1, axis)

    def da(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return y * (g - inner)

    return _unary(a, y, da, "softmax")


def layernorm(x, gain, bias, eps=1e-5):
    """Normalize over the last axis, then affine: gain * xhat + bias."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if eps <= 0:
        raise DomainError("layernorm eps must be > 0")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = gain.data * xhat + bias.data
    needs = x.requires_grad or gain.requires_grad or bias.requires_grad

    def backward(grad):
        if gain.requires_grad:
            gain._accumulate(_unbroadcast(grad * xhat, gain.shape))
        if bias.requires_grad:
            bias._accumulate(_unbroadcast(grad, bias.shape))
        if x.requires_grad:
            dxhat = grad * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (dxhat - m1 - xhat * m2))

    return Tensor(out, needs, (x, gain, bias), backward, "layernorm")


# ---------------------------------------------------------------------------
# indexing / shaping
# ---------------------------------------------------------------------------

def gather_rows(a, idx):
    """Select rows of a 2-d tensor; backward scatters into source rows."""
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeMismatch(f"gather_rows expects a 2-d tensor, got {a.shape}")
    idx = np.asarray(idx, dtype=np.int64)
    n = a.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"gather index out of range [0,{n})")
    out = a.data[idx]

    def da(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return full

    return _unary(a, out, da, "gather_rows")


def gather_tokens(a, idx):
    """Batched row gather: a[B,N,D], idx[B,K] -> [B,K,D]."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    if a.ndim != 3 or idx.ndim != 2 or idx.shape[0] != a.shape[0]:
        raise ShapeMismatch(f"gather_tokens: tensor {a.shape}, idx {idx.shape}")
    n = a.shape[1]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"gather index out of range [0,{n})")
    batch_ix = np.arange(a.shape[0])[:, None]
    out = a.data[batch_ix, idx]

    def da(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (batch_ix, idx), g)
        return full

    return _unary(a, out, da, "gather_tokens")


def slice_axis(a, axis, start, stop):
    a = as_tensor(a)
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(start, stop)
    sl = tuple(sl)
    out = a.data[sl]

    def da(g):
        full = np.zeros_like(a.data)
        full[sl] = g
        return full

    return _unary(a, out, da, "slice")


def concat(tensors, axis):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    needs = any(t.requires_grad for t in tensors)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * grad.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(grad[tuple(sl)])

    return Tensor(out, needs, tuple(tensors), backward, "concat")


def reshape(a, shape):
    a = as_tensor(a)
    orig = a.shape
    return _unary(a, a.data.reshape(shape), lambda g: g.reshape(orig), "reshape")


def transpose(a, axes):
    a = as_tensor(a)
    inv = np.argsort(axes)
    return _unary(a, a.data.transpose(axes), lambda g: g.transpose(inv), "transpose")


def reduce_sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def da(g):
        if axis is None:
            return np.full(a.shape, g, dtype=a.data.dtype)
        gk = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gk, a.shape).copy()

    return _unary(a, out, da, "sum")


def reduce_mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        denom = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        denom = math.prod(a.shape[ax] for ax in axes)
    return scale(reduce_sum(a, axis, keepdims), 1.0 / denom)
