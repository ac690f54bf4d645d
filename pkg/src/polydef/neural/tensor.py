"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray plus the graph edges needed for backprop. Ops
build the graph eagerly; ``backward`` runs the reverse sweep from a scalar
loss, accumulating gradients into every tensor created with
``requires_grad=True``. Values keep whatever dtype they are created with,
so the same graph code runs in 32-bit (training) or 64-bit (gradient
checking) precision.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("values", "grad", "parents", "_backward", "requires_grad", "name")

    def __init__(self, values, parents=(), backward=None, requires_grad=False, name=None):
        self.values = values if isinstance(values, np.ndarray) else np.asarray(values)
        self.parents = tuple(parents)
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    def item(self) -> float:
        return float(self.values)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.values.shape}, grad={self.requires_grad}{tag})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(values, dtype=None) -> Tensor:
    return Tensor(np.asarray(values, dtype=dtype))


def _unbroadcast(grad, shape):
    """Reduce a broadcast gradient back to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.values + b.values
    return Tensor(out, (a, b), lambda g: (_unbroadcast(g, a.values.shape),
                                          _unbroadcast(g, b.values.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.values - b.values
    return Tensor(out, (a, b), lambda g: (_unbroadcast(g, a.values.shape),
                                          _unbroadcast(-g, b.values.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.values * b.values
    return Tensor(out, (a, b), lambda g: (_unbroadcast(g * b.values, a.values.shape),
                                          _unbroadcast(g * a.values, b.values.shape)))


def scale(a: Tensor, s: float) -> Tensor:
    return Tensor(a.values * s, (a,), lambda g: (g * s,))


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = a.values @ b.values
    return Tensor(out, (a, b), lambda g: (g @ b.values.T, a.values.T @ g))


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = list(tensors)
    out = np.concatenate([t.values for t in tensors], axis=axis)
    sizes = [t.values.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(
            np.take(g, range(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(sizes))
        )

    return Tensor(out, tensors, backward)


def split_cols(x: Tensor, sizes) -> list[Tensor]:
    """Split the last axis into consecutive column blocks."""
    offsets = np.cumsum([0] + list(sizes))
    parts = []
    for i in range(len(sizes)):
        lo, hi = offsets[i], offsets[i + 1]

        def backward(g, lo=lo, hi=hi):
            full = np.zeros_like(x.values)
            full[..., lo:hi] = g
            return (full,)

        parts.append(Tensor(x.values[..., lo:hi], (x,), backward))
    return parts


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.values)
    return Tensor(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    x = a.values
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return Tensor(out, (a,), lambda g: (g * out * (1.0 - out),))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.values)
    return Tensor(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return Tensor(np.log(a.values), (a,), lambda g: (g / a.values,))


def sum_all(a: Tensor) -> Tensor:
    return Tensor(np.asarray(a.values.sum()), (a,),
                  lambda g: (np.broadcast_to(g, a.values.shape).copy(),))


def sum_axis(a: Tensor, axis: int) -> Tensor:
    out = a.values.sum(axis=axis)

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis), a.values.shape).copy(),)

    return Tensor(out, (a,), backward)


def mean_all(a: Tensor) -> Tensor:
    return scale(sum_all(a), 1.0 / a.values.size)


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.values.shape
    return Tensor(a.values.reshape(shape), (a,), lambda g: (g.reshape(orig),))


def transpose(a: Tensor) -> Tensor:
    return Tensor(a.values.T, (a,), lambda g: (g.T,))


def take_rows(a: Tensor, indices) -> Tensor:
    """Row gather along axis 0; `indices` may be any integer array shape."""
    indices = np.asarray(indices)
    out = a.values[indices]

    def backward(g):
        full = np.zeros_like(a.values)
        np.add.at(full, indices, g)
        return (full,)

    return Tensor(out, (a,), backward)


def max_axis(a: Tensor, axis: int) -> Tensor:
    """Max along an axis; gradient flows to the first argmax per slice."""
    idx = np.argmax(a.values, axis=axis)
    idx_keep = np.expand_dims(idx, axis)
    out = np.take_along_axis(a.values, idx_keep, axis=axis).squeeze(axis)

    def backward(g):
        full = np.zeros_like(a.values)
        np.put_along_axis(full, idx_keep, np.expand_dims(g, axis), axis=axis)
        return (full,)

    return Tensor(out, (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.values - a.values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return ((g - inner) * out,)

    return Tensor(out, (a,), backward)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Per-row negative log-likelihood of integer `targets` under softmax(logits)."""
    targets = np.asarray(targets)
    v = logits.values
    shifted = v - v.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1)) + v.max(axis=-1)
    rows = np.arange(v.shape[0])
    losses = logz - v[rows, targets]

    def backward(g):
        probs = np.exp(shifted) / np.exp(shifted).sum(axis=-1, keepdims=True)
        probs[rows, targets] -= 1.0
        return (probs * g[:, None],)

    return Tensor(losses, (logits,), backward)


def straight_through_onehot(z: Tensor) -> Tensor:
    """Forward: one-hot at the row argmax of z. Backward: identity to z.

    The forward/backward mismatch is deliberate: downstream consumers see a
    hard selection while gradients behave as if the soft weights were used.
    """
    v = z.values
    idx = np.argmax(v, axis=-1)
    hard = np.zeros_like(v)
    if v.ndim == 1:
        hard[idx] = 1.0
    else:
        hard[np.arange(v.shape[0]), idx] = 1.0
    return Tensor(hard, (z,), lambda g: (g,))


def weighted_rows(weights: Tensor, mats) -> Tensor:
    """(B,K) weights times constant (B,K,D) stack -> (B,D) combinations."""
    mats = np.asarray(mats)
    out = np.einsum("bk,bkd->bd", weights.values, mats)
    return Tensor(out, (weights,), lambda g: (np.einsum("bd,bkd->bk", g, mats),))


def row_dots(vecs: Tensor, mats) -> Tensor:
    """(B,D) vectors dotted with each row of a constant (B,K,D) stack -> (B,K)."""
    mats = np.asarray(mats)
    out = np.einsum("bd,bkd->bk", vecs.values, mats)
    return Tensor(out, (vecs,), lambda g: (np.einsum("bk,bkd->bd", g, mats),))


def backward(root: Tensor, seed=None) -> None:
    """Reverse sweep from `root`, accumulating into .grad of reachable tensors."""
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad:
                stack.append((p, False))

    root.grad = np.ones_like(root.values) if seed is None else np.asarray(seed)
    for node in reversed(topo):
        if node._backward is None or node.grad is None:
            continue
        for parent, grad in zip(node.parents, node._backward(node.grad)):
            if grad is None or not parent.requires_grad:
                continue
            parent.grad = grad if parent.grad is None else parent.grad + grad
