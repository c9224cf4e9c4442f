"""Minimal reverse-mode automatic differentiation on float64 numpy arrays.

Each operation records its parents and a closure that routes the output
gradient back to them; ``backward`` walks the recorded graph once in
reverse topological order. Every op checks its result for NaN/Inf so a
diverging forward pass fails loudly at the op that produced it.

The op set is exactly what a message-passing regressor needs: dense affine
maps, pointwise nonlinearities, concatenation, row gather / segment
scatter-add for edge aggregation, layer normalization, and an
order-canonical mean pool (rows are summed in sorted order per column, so
pooling is bitwise invariant under row permutations).
"""

from __future__ import annotations

import numpy as np

from .errors import GraphConsumedError, NonFiniteTensorError, ShapeMismatchError


class Tensor:
    """Dense float64 array plus an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NonFiniteTensorError("non-finite values produced in forward pass")
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad = t.grad + g


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward_fn)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data - b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward_fn)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatchError(f"matmul {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def backward_fn(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _make(data, (a, b), backward_fn)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accumulate(t, piece)

    return _make(data, tuple(tensors), backward_fn)


def relu(x) -> Tensor:
    x = _as_tensor(x)
    data = np.maximum(x.data, 0.0)

    def backward_fn(g):
        _accumulate(x, g * (x.data > 0.0))

    return _make(data, (x,), backward_fn)


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    s = _stable_sigmoid(x.data)

    def backward_fn(g):
        _accumulate(x, g * s * (1.0 - s))

    return _make(s, (x,), backward_fn)


def silu(x) -> Tensor:
    x = _as_tensor(x)
    s = _stable_sigmoid(x.data)
    data = x.data * s

    def backward_fn(g):
        _accumulate(x, g * (s + x.data * s * (1.0 - s)))

    return _make(data, (x,), backward_fn)


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    # exp(-|z|) never overflows; both branches share it.
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0.0, 1.0 / (1.0 + ez), ez / (1.0 + ez))


def gather_rows(x, index: np.ndarray) -> Tensor:
    """Rows x[index]; the backward pass scatter-adds back."""
    x = _as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    data = x.data[index]

    def backward_fn(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, index, g)
            _accumulate(x, gx)

    return _make(data, (x,), backward_fn)


def segment_sum(x, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Sum rows of x into num_segments buckets; empty buckets are zero.

    Accumulation follows row order, so results are reproducible for a
    fixed input ordering.
    """
    x = _as_tensor(x)
    ids = np.asarray(segment_ids, dtype=np.int64)
    if ids.shape != (x.data.shape[0],):
        raise ShapeMismatchError(f"segment ids {ids.shape} for {x.data.shape} rows")
    data = np.zeros((num_segments,) + x.data.shape[1:])
    np.add.at(data, ids, x.data)

    def backward_fn(g):
        _accumulate(x, g[ids])

    return _make(data, (x,), backward_fn)


def layer_norm(x, gain, shift, eps: float = 1e-5) -> Tensor:
    """Normalize each row to zero mean / unit variance, then affine."""
    x, gain, shift = _as_tensor(x), _as_tensor(gain), _as_tensor(shift)
    if x.data.shape[-1] != gain.data.shape[-1] or x.data.shape[-1] != shift.data.shape[-1]:
        raise ShapeMismatchError(
            f"layer_norm feature dim {x.data.shape[-1]} vs affine "
            f"{gain.data.shape[-1]}/{shift.data.shape[-1]}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = centered * inv
    data = y * gain.data + shift.data

    def backward_fn(g):
        _accumulate(shift, _unbroadcast(g, shift.data.shape))
        _accumulate(gain, _unbroadcast(g * y, gain.data.shape))
        if x.requires_grad:
            dy = g * gain.data
            dx = inv * (
                dy
                - dy.mean(axis=-1, keepdims=True)
                - y * (dy * y).mean(axis=-1, keepdims=True)
            )
            _accumulate(x, dx)

    return _make(data, (x, gain, shift), backward_fn)


def sorted_mean_rows(x) -> Tensor:
    """Mean over rows, summing each column in sorted order.

    The sorted accumulation order makes the result bitwise independent of
    row permutations; the gradient is the usual uniform 1/N broadcast.
    """
    x = _as_tensor(x)
    n = x.data.shape[0]
    data = np.sort(x.data, axis=0).sum(axis=0, keepdims=True) / n

    def backward_fn(g):
        _accumulate(x, np.broadcast_to(g / n, x.data.shape))

    return _make(data, (x,), backward_fn)


def sum_all(x) -> Tensor:
    x = _as_tensor(x)
    data = np.asarray(x.data.sum())

    def backward_fn(g):
        _accumulate(x, np.broadcast_to(g, x.data.shape))

    return _make(data, (x,), backward_fn)


def scale(x, factor: float) -> Tensor:
    x = _as_tensor(x)
    data = x.data * factor

    def backward_fn(g):
        _accumulate(x, g * factor)

    return _make(data, (x,), backward_fn)


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    data = x.data.reshape(shape)

    def backward_fn(g):
        _accumulate(x, g.reshape(x.data.shape))

    return _make(data, (x,), backward_fn)


def backward(loss: Tensor) -> None:
    """Populate .grad on every reachable tensor that requires it."""
    if loss.data.size != 1:
        raise ShapeMismatchError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if loss._consumed:
        raise GraphConsumedError("backward already ran on this graph; re-run the forward pass")
    loss._consumed = True
    if not loss.requires_grad:
        return

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen and parent.requires_grad:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)
