"""Dense tensors with a recorded trace for reverse-mode differentiation.

Every primitive below computes its forward value with numpy and, when any
input requires a gradient, attaches a closure that pushes the output gradient
back to its inputs. ``backward`` walks the trace in reverse topological order.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

_GRAD_ENABLED = True


class ShapeError(ValueError):
    """Raised when a primitive receives inputs of incompatible shape."""

    def __init__(self, op: str, detail: str):
        super().__init__(f"{op}: {detail}")
        self.op = op
        self.detail = detail


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    __add__ = lambda self, other: add(self, other)
    __radd__ = lambda self, other: add(other, self)
    __sub__ = lambda self, other: sub(self, other)
    __rsub__ = lambda self, other: sub(other, self)
    __mul__ = lambda self, other: mul(self, other)
    __rmul__ = lambda self, other: mul(other, self)
    __matmul__ = lambda self, other: matmul(self, other)
    __neg__ = lambda self: mul(self, -1.0)
    __getitem__ = lambda self, key: getitem(self, key)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if dtype is None and not isinstance(x, np.ndarray):
        dtype = np.float32
    return Tensor(x, dtype=dtype)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    if lead > 0:
        g = g.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, f"cannot broadcast {a.shape} with {b.shape}") from None


def _cast_pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype))
    return as_tensor(a), as_tensor(b)


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _cast_pair(a, b)
    _check_broadcast("add", a, b)

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _cast_pair(a, b)
    _check_broadcast("sub", a, b)

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g, b.shape))

    return _make(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    if isinstance(b, (int, float)) and isinstance(a, Tensor):
        c = b

        def backward_scalar(g):
            a._accum(g * c)

        return _make(a.data * np.asarray(c, dtype=a.dtype), (a,), backward_scalar)
    a, b = _cast_pair(a, b)
    _check_broadcast("mul", a, b)

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0)

    def backward(g):
        x._accum(g * (x.data > 0))

    return _make(out, (x,), backward)


_GELU_C = float(np.sqrt(2.0 / np.pi))


def gelu(x: Tensor) -> Tensor:
    """Tanh approximation of the Gaussian error linear unit."""
    xd = x.data
    x2 = xd * xd
    inner = _GELU_C * (xd + 0.044715 * x2 * xd)
    t = np.tanh(inner)
    out = 0.5 * xd * (1.0 + t)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x2)
        d = 0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * dinner
        x._accum(g * d)

    return _make(out.astype(xd.dtype, copy=False), (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)

    def backward(g):
        x._accum(g * out * (1.0 - out))

    return _make(out, (x,), backward)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def dropout(x: Tensor, p: float, rng: np.random.Generator | None, training: bool = True) -> Tensor:
    if not training or p <= 0.0 or rng is None:
        return x
    draw = rng.random(x.shape, dtype=np.float32 if x.dtype == np.float32 else np.float64)
    keep = (draw >= p).astype(x.dtype) * np.asarray(1.0 / (1.0 - p), dtype=x.dtype)

    def backward(g):
        x._accum(g * keep)

    return _make(x.data * keep, (x,), backward)


# ---------------------------------------------------------------------------
# shape
# ---------------------------------------------------------------------------

def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", f"cannot reshape {x.shape} to {shape}") from None

    def backward(g):
        x._accum(g.reshape(x.shape))

    return _make(out, (x,), backward)


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError("transpose", f"axes {axes} invalid for rank {x.ndim}")
    inv = tuple(np.argsort(axes))

    def backward(g):
        x._accum(g.transpose(inv))

    return _make(x.data.transpose(axes), (x,), backward)


def getitem(x: Tensor, key) -> Tensor:
    out = x.data[key]

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        x._accum(full)

    return _make(np.array(out, copy=True), (x,), backward)


# ---------------------------------------------------------------------------
# reductions (64-bit accumulation)
# ---------------------------------------------------------------------------

def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.sum(x.data, axis=axis, dtype=np.float64, keepdims=keepdims).astype(x.dtype)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accum(np.broadcast_to(g, x.shape))

    return _make(out, (x,), backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / float(n))


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul", f"operands must be at least 2-d, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", f"inner dimensions differ: {a.shape} @ {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError("matmul", f"batch dimensions differ: {a.shape} @ {b.shape}") from None

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        if b.requires_grad:
            if b.ndim == 2:
                k = a.shape[-1]
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
            b._accum(gb)

    return _make(out, (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out


# ---------------------------------------------------------------------------
# normalisation / probability
# ---------------------------------------------------------------------------

def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = (e / e.sum(axis=axis, keepdims=True, dtype=np.float64)).astype(x.dtype)

    def backward(g):
        dot = np.sum(g * out, axis=axis, keepdims=True, dtype=np.float64).astype(x.dtype)
        x._accum(out * (g - dot))

    return _make(out, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError("layer_norm", f"gain/bias must be ({d},), got {gamma.shape} and {beta.shape}")
    xd = x.data
    mu = np.mean(xd, axis=-1, keepdims=True, dtype=np.float64).astype(x.dtype)
    xc = xd - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True, dtype=np.float64)
    inv = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma._accum((g * xhat).reshape(-1, d).sum(axis=0, dtype=np.float64).astype(x.dtype))
        if beta.requires_grad:
            beta._accum(g.reshape(-1, d).sum(axis=0, dtype=np.float64).astype(x.dtype))
        if x.requires_grad:
            gx = g * gamma.data
            m1 = gx.mean(axis=-1, keepdims=True, dtype=np.float64).astype(x.dtype)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True, dtype=np.float64).astype(x.dtype)
            x._accum(inv * (gx - m1 - xhat * m2))

    return _make(out, (x, gamma, beta), backward)


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids)
    if ids.dtype.kind not in "iu":
        raise ShapeError("embedding", f"ids must be integers, got {ids.dtype}")
    if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
        raise ShapeError("embedding", f"id out of range for table of {weight.shape[0]} rows")
    out = weight.data[ids]

    def backward(g):
        full = np.zeros_like(weight.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, weight.shape[1]))
        weight._accum(full)

    return _make(out, (weight,), backward)


def _weights_or_ones(weights, n: int, dtype) -> np.ndarray:
    if weights is None:
        return np.ones(n, dtype=dtype)
    w = np.asarray(weights, dtype=dtype).reshape(-1)
    if w.shape[0] != n:
        raise ShapeError("loss", f"weights of length {w.shape[0]} for {n} positions")
    return w


def cross_entropy(logits: Tensor, targets: np.ndarray, weights=None) -> Tensor:
    """Weighted mean of -log softmax(logits)[target] over rows.

    ``logits`` is (N, V); rows with zero weight (padding) contribute nothing.
    """
    if logits.ndim != 2:
        raise ShapeError("cross_entropy", f"logits must be (N, V), got {logits.shape}")
    targets = np.asarray(targets).reshape(-1)
    n, v = logits.shape
    if targets.shape[0] != n:
        raise ShapeError("cross_entropy", f"{targets.shape[0]} targets for {n} rows")
    if n and (targets.min() < 0 or targets.max() >= v):
        raise ShapeError("cross_entropy", f"target id out of range for {v} classes")
    w = _weights_or_ones(weights, n, np.float64)
    total = w.sum()
    if total <= 0:
        raise ShapeError("cross_entropy", "all positions have zero weight")
    z = logits.data.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    nll = logsumexp - z[np.arange(n), targets]
    loss = np.asarray((w * nll).sum() / total, dtype=logits.dtype)

    def backward(g):
        p = np.exp(z - logsumexp[:, None])
        p[np.arange(n), targets] -= 1.0
        logits._accum((p * (w / total)[:, None] * float(g)).astype(logits.dtype))

    return _make(loss, (logits,), backward)


def binary_cross_entropy_with_logits(logits: Tensor, targets: np.ndarray, weights=None) -> Tensor:
    """Weighted mean of the logistic loss; ``targets`` are 0/1 per element."""
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    z = logits.data.astype(np.float64).reshape(-1)
    if t.shape != z.shape:
        raise ShapeError("binary_cross_entropy", f"{t.shape[0]} targets for {z.shape[0]} logits")
    w = _weights_or_ones(weights, z.shape[0], np.float64)
    total = w.sum()
    if total <= 0:
        raise ShapeError("binary_cross_entropy", "all positions have zero weight")
    # log(1 + exp(-|z|)) form is stable for large |z|
    per = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    loss = np.asarray((w * per).sum() / total, dtype=logits.dtype)

    def backward(g):
        p = _sigmoid(z)
        gz = (p - t) * w / total * float(g)
        logits._accum(gz.reshape(logits.shape).astype(logits.dtype))

    return _make(loss, (logits,), backward)


# ---------------------------------------------------------------------------
# reverse pass
# ---------------------------------------------------------------------------

def backward(loss: Tensor) -> None:
    if loss.data.size != 1 or loss.ndim > 1:
        raise ShapeError("backward", f"loss must be a scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
            # interior buffers are no longer needed once propagated
            node._backward = None
            node._parents = ()
            node.grad = None
