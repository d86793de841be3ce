"""Minimal reverse-mode automatic differentiation over numpy arrays.

Each operation records its inputs and a closure that routes the output
gradient back to them; ``backward`` walks the recorded graph once in reverse
topological order. Arrays keep whatever float precision they were created
with: float32 for training, float64 when verifying gradients numerically.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Sequence

import numpy as np

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording, e.g. for the prediction path."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        if not np.issubdtype(self.data.dtype, np.floating):
            self.data = self.data.astype(np.float32)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self) -> None:
        """Backpropagate from this (scalar) tensor through the recorded graph."""
        if self.data.size != 1:
            raise ValueError("backward() expects a scalar loss tensor")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Operator sugar; the implementations live below.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("divide by a Tensor via explicit ops")
        return mul(self, 1.0 / other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None):
        count = self.data.size if axis is None else self.data.shape[axis]
        return mul(sum_(self, axis=axis), 1.0 / count)

    def reshape(self, *shape):
        return reshape(self, shape)


def as_tensor(value, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def _make(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad or p._parents for p in parents):
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a: Tensor, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(a.data + b.data, (a, b), backward)


def mul(a: Tensor, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(a.data * b.data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"incompatible matmul shapes {a.data.shape} @ {b.data.shape}")

    def backward(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    return _make(a.data @ b.data, (a, b), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward(g):
        x._accumulate(g * mask)

    return _make(np.where(mask, x.data, 0.0), (x,), backward)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def backward(g):
        x._accumulate(g * (1.0 - y * y))

    return _make(y, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    # Split form avoids exp overflow for large negative inputs.
    y = np.where(
        x.data >= 0,
        1.0 / (1.0 + np.exp(-np.abs(x.data))),
        np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))),
    )

    def backward(g):
        x._accumulate(g * y * (1.0 - y))

    return _make(y, (x,), backward)


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)

    def backward(g):
        x._accumulate(g * y)

    return _make(y, (x,), backward)


def log(x: Tensor) -> Tensor:
    def backward(g):
        x._accumulate(g / x.data)

    return _make(np.log(x.data), (x,), backward)


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.data.shape).copy())

    return _make(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward)


def reshape(x: Tensor, shape) -> Tensor:
    def backward(g):
        x._accumulate(g.reshape(x.data.shape))

    return _make(x.data.reshape(shape), (x,), backward)


def take(x: Tensor, index) -> Tensor:
    """Basic slicing/indexing with gradient routing back into the slice."""

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        x._accumulate(full)

    return _make(x.data[index], (x,), backward)


def gather_pairs(x: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """x[rows[k], cols[k]] for each k, as a 1-D tensor."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, (rows, cols), g)
        x._accumulate(full)

    return _make(x.data[rows, cols], (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, a, b in zip(tensors, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(a, b)
            t._accumulate(g[tuple(index)])

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def logsumexp(x: Tensor, axis: int) -> Tensor:
    m = np.max(x.data, axis=axis, keepdims=True)
    shifted = np.exp(x.data - m)
    total = shifted.sum(axis=axis, keepdims=True)
    y = (m + np.log(total)).squeeze(axis=axis)
    softmax = shifted / total

    def backward(g):
        x._accumulate(np.expand_dims(g, axis) * softmax)

    return _make(y, (x,), backward)


def embedding(weights: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup: ids of any shape produce that shape plus the feature axis."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= weights.data.shape[0]):
        raise IndexError(
            f"ids out of range for embedding with {weights.data.shape[0]} rows"
        )

    def backward(g):
        full = np.zeros_like(weights.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, weights.data.shape[1]))
        weights._accumulate(full)

    return _make(weights.data[ids], (weights,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = np.exp(x.data - np.max(x.data, axis=axis, keepdims=True))
    y = shifted / shifted.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        x._accumulate(y * (g - inner))

    return _make(y, (x,), backward)


def cross_entropy(probs: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log probability of the target classes.

    ``probs`` are probabilities (rows summing to 1), targets integer indices.
    """
    targets = np.asarray(targets, dtype=np.int64)
    rows = np.arange(probs.data.shape[0])
    picked = gather_pairs(probs, rows, targets)
    return mul(sum_(log(picked)), -1.0 / max(len(targets), 1))


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray | None = None):
    """Fused, numerically stable softmax plus cross-entropy.

    Returns (mean loss over unmasked rows, probabilities as a plain array).
    """
    targets = np.asarray(targets, dtype=np.int64)
    z = logits.data - np.max(logits.data, axis=-1, keepdims=True)
    expz = np.exp(z)
    probs = expz / expz.sum(axis=-1, keepdims=True)
    logp = z - np.log(expz.sum(axis=-1, keepdims=True))
    n = logits.data.shape[0]
    rows = np.arange(n)
    if mask is None:
        mask = np.ones(n, dtype=logits.data.dtype)
    else:
        mask = np.asarray(mask, dtype=logits.data.dtype)
    denom = max(float(mask.sum()), 1.0)
    loss_value = -(logp[rows, targets] * mask).sum() / denom

    def backward(g):
        dlogits = probs.copy()
        dlogits[rows, targets] -= 1.0
        dlogits *= (mask / denom)[:, None]
        logits._accumulate(g * dlogits)

    loss = _make(np.asarray(loss_value, dtype=logits.data.dtype), (logits,), backward)
    return loss, probs


def dropout(x: Tensor, rate: float, train: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: scaling happens at train time, inference is identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate).astype(x.data.dtype)
    scale = Tensor(keep / (1.0 - rate))
    return mul(x, scale)
