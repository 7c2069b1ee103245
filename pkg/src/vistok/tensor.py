"""numpy-backed tensors with reverse-mode automatic differentiation.

Values live in row-major numpy arrays, float32 by default; float64 is used
by the finite-difference gradient checker, where 32-bit noise would swamp
the tolerances. Every op records a node in a dynamic graph whenever one of
its inputs requires grad; ``backward()`` walks that graph once in reverse
topological order. Gradients are plain numpy arrays stored on ``.grad`` and
keep accumulating across ``backward()`` calls until explicitly cleared, so
callers can sum contributions from several passes before an optimizer step.

Shape problems raise ``ShapeError`` naming the op and the shapes involved.
Non-finite values are an error state, detected by ``check_finite``; forward
ops themselves do not scan their outputs.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

DEFAULT_DTYPE = np.float32
_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

_grad_enabled = True


class no_grad:
    """Context manager that disables graph construction (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._saved = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._saved
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            raise TypeError("wrap raw arrays, not Tensors")
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[Tensor], None] | None = None

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=False)

    def check_finite(self, name: str) -> "Tensor":
        if not np.isfinite(self.data).all():
            raise NumericError(f"non-finite values in {name}")
        return self

    def zero_grad(self) -> None:
        self.grad = None

    # -- autodiff ------------------------------------------------------

    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeError(f"backward() requires a scalar loss, got shape {self.shape}")
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited and p.requires_grad:
                    stack.append((p, False))
        _accum(self, np.ones_like(self.data))
        for node in reversed(order):
            if node._backward_fn is not None:
                node._backward_fn(node)

    # -- operator sugar ------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other, self), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor) or isinstance(other, np.ndarray):
            raise TypeError("tensor division is only supported by scalars; use explicit ops")
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes: Sequence[int]):
        return transpose(self, axes)

    def abs(self):
        return tabs(self)


# -- graph plumbing ----------------------------------------------------


def _wrap(x, like: Tensor) -> Tensor:
    """Coerce a scalar or ndarray into a constant Tensor matching ``like``'s dtype."""
    if isinstance(x, Tensor):
        if x.data.dtype != like.data.dtype:
            raise TypeError(f"mixed dtypes {x.data.dtype} vs {like.data.dtype}; cast explicitly")
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    req = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=req, dtype=data.dtype)
    if req:
        out._parents = parents
        out._backward_fn = backward_fn
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to ``shape`` by summing expanded axes."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- elementwise and scalar ops ----------------------------------------


def add(a: Tensor, b) -> Tensor:
    b = _wrap(b, a)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: cannot broadcast {a.shape} with {b.shape}") from None

    def bw(out: Tensor):
        _accum(a, _unbroadcast(out.grad, a.data.shape))
        _accum(b, _unbroadcast(out.grad, b.data.shape))

    return _make(data, (a, b), bw)


def sub(a: Tensor, b) -> Tensor:
    b = _wrap(b, a)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: cannot broadcast {a.shape} with {b.shape}") from None

    def bw(out: Tensor):
        _accum(a, _unbroadcast(out.grad, a.data.shape))
        _accum(b, _unbroadcast(-out.grad, b.data.shape))

    return _make(data, (a, b), bw)


def mul(a: Tensor, b) -> Tensor:
    b = _wrap(b, a)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: cannot broadcast {a.shape} with {b.shape}") from None

    def bw(out: Tensor):
        _accum(a, _unbroadcast(out.grad * b.data, a.data.shape))
        _accum(b, _unbroadcast(out.grad * a.data, b.data.shape))

    return _make(data, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    def bw(out: Tensor):
        _accum(a, -out.grad)

    return _make(-a.data, (a,), bw)


def tabs(a: Tensor) -> Tensor:
    def bw(out: Tensor):
        _accum(a, out.grad * np.sign(a.data))

    return _make(np.abs(a.data), (a,), bw)


# -- linear algebra ----------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if not isinstance(b, Tensor):
        b = _wrap(b, a)
    if a.ndim not in (2, 3) or b.ndim != a.ndim:
        raise ShapeError(f"matmul: expected matching 2D or 3D operands, got {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2] or (a.ndim == 3 and a.shape[0] != b.shape[0]):
        raise ShapeError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    data = a.data @ b.data

    def bw(out: Tensor):
        g = out.grad
        if a.ndim == 2:
            _accum(a, g @ b.data.T)
            _accum(b, a.data.T @ g)
        else:
            _accum(a, g @ b.data.transpose(0, 2, 1))
            _accum(b, a.data.transpose(0, 2, 1) @ g)

    return _make(data, (a, b), bw)


# -- shape ops ---------------------------------------------------------


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from None

    def bw(out: Tensor):
        _accum(a, out.grad.reshape(a.data.shape))

    return _make(data, (a,), bw)


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(int(x) for x in axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"transpose: {axes} is not a permutation of axes for shape {a.shape}")
    inv = tuple(int(np.argsort(axes)[i]) for i in range(len(axes)))

    def bw(out: Tensor):
        _accum(a, out.grad.transpose(inv))

    return _make(a.data.transpose(axes), (a,), bw)


def getitem(a: Tensor, idx) -> Tensor:
    data = a.data[idx]
    if np.isscalar(data) or data.ndim == 0:
        data = np.asarray(data, dtype=a.data.dtype)

    def bw(out: Tensor):
        if a.requires_grad:
            g = np.zeros_like(a.data)
            np.add.at(g, idx, out.grad)
            _accum(a, g)

    return _make(np.array(data, copy=True), (a,), bw)


def index_rows(a: Tensor, indices: np.ndarray) -> Tensor:
    """Gather rows along axis 0; indices may repeat (embedding lookup)."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError(f"index_rows: indices must be 1D, got shape {idx.shape}")
    data = a.data[idx]

    def bw(out: Tensor):
        if a.requires_grad:
            g = np.zeros_like(a.data)
            np.add.at(g, idx, out.grad)
            _accum(a, g)

    return _make(data, (a,), bw)


def concat(parts: Iterable[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    if not parts:
        raise ShapeError("concat: need at least one tensor")
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[p.shape for p in parts]} on axis {axis}") from None
    sizes = [p.data.shape[axis] for p in parts]

    def bw(out: Tensor):
        offset = 0
        for p, s in zip(parts, sizes):
            sl = [slice(None)] * out.grad.ndim
            sl[axis] = slice(offset, offset + s)
            _accum(p, out.grad[tuple(sl)])
            offset += s

    return _make(data, tuple(parts), bw)


# -- reductions --------------------------------------------------------


def _reduce_count(shape: tuple[int, ...], axis) -> int:
    if axis is None:
        return int(np.prod(shape)) if shape else 1
    axes = axis if isinstance(axis, tuple) else (axis,)
    n = 1
    for ax in axes:
        n *= shape[ax]
    return n


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(out: Tensor):
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    return _make(np.asarray(data, dtype=a.data.dtype), (a,), bw)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = _reduce_count(a.data.shape, axis)

    def bw(out: Tensor):
        g = out.grad / count
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    return _make(np.asarray(data, dtype=a.data.dtype), (a,), bw)


# -- nonlinearities (fused forward+backward) ---------------------------


def softmax(a: Tensor) -> Tensor:
    """Numerically stable softmax over the last axis."""
    m = a.data.max(axis=-1, keepdims=True)
    e = np.exp(a.data - m)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(out: Tensor):
        g = out.grad
        dot = (g * y).sum(axis=-1, keepdims=True)
        _accum(a, y * (g - dot))

    return _make(y, (a,), bw)


def silu(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.data))

    def bw(out: Tensor):
        _accum(a, out.grad * s * (1.0 + a.data * (1.0 - s)))

    return _make(a.data * s, (a,), bw)


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(a: Tensor) -> Tensor:
    """tanh-approximate GELU (the GPT-2 form)."""
    x = a.data
    u = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(u)

    def bw(out: Tensor):
        du = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
        _accum(a, out.grad * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * du))

    return _make((0.5 * x * (1.0 + t)).astype(x.dtype), (a,), bw)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Layer norm over the last axis with learnable scale and shift.

    eps sits inside the sqrt, so a zero-variance row normalizes to zeros and
    the output reduces to ``beta``.
    """
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layer_norm: scale/shift must have shape ({d},), got {gamma.shape}/{beta.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat * gamma.data + beta.data

    def bw(out: Tensor):
        g = out.grad
        if gamma.requires_grad:
            _accum(gamma, (g * xhat).reshape(-1, d).sum(axis=0))
        if beta.requires_grad:
            _accum(beta, g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            dxhat = g * gamma.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            _accum(x, inv * (dxhat - m1 - xhat * m2))

    return _make(y, (x, gamma, beta), bw)


def l2_normalize(a: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale rows to unit L2 norm over the last axis."""
    n = np.sqrt((a.data * a.data).sum(axis=-1, keepdims=True) + eps)
    y = a.data / n

    def bw(out: Tensor):
        g = out.grad
        dot = (g * y).sum(axis=-1, keepdims=True)
        _accum(a, (g - y * dot) / n)

    return _make(y, (a,), bw)


# -- losses ------------------------------------------------------------


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: shape mismatch {pred.shape} vs {target.shape}")
    d = sub(pred, target)
    return tmean(mul(d, d))


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ShapeError(f"l1_loss: shape mismatch {pred.shape} vs {target.shape}")
    return tmean(tabs(sub(pred, target)))


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean cross-entropy from raw logits [N, V] and integer targets [N]."""
    t = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or t.ndim != 1 or t.shape[0] != logits.shape[0]:
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs targets {t.shape}")
    n, v = logits.shape
    if t.size and (t.min() < 0 or t.max() >= v):
        raise ShapeError(f"cross_entropy: target id out of range for vocab {v}")
    m = logits.data.max(axis=-1, keepdims=True)
    e = np.exp(logits.data - m)
    z = e.sum(axis=-1, keepdims=True)
    logp = logits.data - m - np.log(z)
    loss = -logp[np.arange(n), t].mean()

    def bw(out: Tensor):
        if logits.requires_grad:
            p = e / z
            p[np.arange(n), t] -= 1.0
            _accum(logits, p * (out.grad / n))

    return _make(np.asarray(loss, dtype=logits.data.dtype), (logits,), bw)


# -- constructors ------------------------------------------------------


def zeros(shape, dtype=DEFAULT_DTYPE, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def ones(shape, dtype=DEFAULT_DTYPE, requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)


def constant(arr, dtype=None) -> Tensor:
    return Tensor(np.asarray(arr), dtype=dtype)
