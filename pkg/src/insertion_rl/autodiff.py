"""Reverse-mode automatic differentiation over numpy arrays.

A forward pass builds a graph of `Var` nodes; `backprop` seeds the root
and walks the graph once in reverse topological order, accumulating
gradients into every node that requires them.  All data is float64.
"""
from __future__ import annotations

import numpy as np


class TapeConsumedError(RuntimeError):
    """Raised when a recorded graph is differentiated a second time."""


class NonFiniteError(RuntimeError):
    """Raised when a gradient or loss stops being finite."""


class Var:
    """One node of the recorded computation graph."""

    __slots__ = ("data", "grad", "parents", "vjp", "requires_grad")

    def __init__(self, data, parents=(), vjp=None, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        # vjp(out_grad) -> tuple of gradients, one per parent (None to skip)
        self.vjp = vjp
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def _as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    return Var(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
    )


def sub(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    return Var(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)),
    )


def mul(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    return Var(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def matmul(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    return Var(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def tanh(a) -> Var:
    a = _as_var(a)
    out = np.tanh(a.data)
    return Var(out, (a,), lambda g: (g * (1.0 - out * out),))


def exp(a) -> Var:
    a = _as_var(a)
    out = np.exp(a.data)
    return Var(out, (a,), lambda g: (g * out,))


def log(a) -> Var:
    a = _as_var(a)
    return Var(np.log(a.data), (a,), lambda g: (g / a.data,))


def square(a) -> Var:
    a = _as_var(a)
    return Var(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def clip(a, lo: float, hi: float) -> Var:
    """Hard clip; gradient is passed through inside [lo, hi], zero outside."""
    a = _as_var(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return Var(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


def minimum(a, b) -> Var:
    """Elementwise min; ties route the gradient to the first argument."""
    a, b = _as_var(a), _as_var(b)
    take_a = a.data <= b.data
    return Var(
        np.where(take_a, a.data, b.data),
        (a, b),
        lambda g: (
            _unbroadcast(g * take_a, a.data.shape),
            _unbroadcast(g * ~take_a, b.data.shape),
        ),
    )


def vsum(a, axis=None, keepdims=False) -> Var:
    a = _as_var(a)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return Var(a.data.sum(axis=axis, keepdims=keepdims), (a,), vjp)


def vmean(a, axis=None, keepdims=False) -> Var:
    a = _as_var(a)
    n = a.data.size if axis is None else a.data.shape[axis]

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / n, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / n, a.data.shape).copy(),)

    return Var(a.data.mean(axis=axis, keepdims=keepdims), (a,), vjp)


def concat_cols(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    na = a.data.shape[1]
    return Var(
        np.concatenate([a.data, b.data], axis=1),
        (a, b),
        lambda g: (g[:, :na], g[:, na:]),
    )


def slice_cols(a, j0: int, j1: int) -> Var:
    a = _as_var(a)

    def vjp(g):
        full = np.zeros_like(a.data)
        full[:, j0:j1] = g
        return (full,)

    return Var(a.data[:, j0:j1], (a,), vjp)


def log1m_tanh2(a) -> Var:
    """log(1 - tanh(x)^2), computed in a form stable for large |x|."""
    a = _as_var(a)
    out = 2.0 * (np.log(2.0) - a.data - np.logaddexp(0.0, -2.0 * a.data))
    return Var(out, (a,), lambda g: (g * (-2.0 * np.tanh(a.data)),))


def _toposort(root: Var) -> list[Var]:
    order, seen = [], set()
    stack = [(root, iter(root.parents))]
    seen.add(id(root))
    while stack:
        node, it = stack[-1]
        advanced = False
        for p in it:
            if id(p) not in seen and p.requires_grad:
                seen.add(id(p))
                stack.append((p, iter(p.parents)))
                advanced = True
                break
        if not advanced:
            order.append(node)
            stack.pop()
    return order


def backprop(root: Var, seed=None) -> None:
    """Accumulate d(seed . root)/d(leaf) into .grad of every grad-requiring node."""
    if not root.requires_grad:
        return
    if seed is None:
        seed = np.ones_like(root.data)
    root.grad = np.asarray(seed, dtype=np.float64).reshape(root.data.shape)
    for node in reversed(_toposort(root)):
        if node.vjp is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node.vjp(node.grad)):
            if g is None or not parent.requires_grad:
                continue
            if parent.grad is None:
                parent.grad = np.array(g, dtype=np.float64, copy=True)
            else:
                parent.grad += g
