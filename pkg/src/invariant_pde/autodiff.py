"""Minimal reverse-mode automatic differentiation over numpy arrays.

Operations accept either tracked `Var` nodes or plain values (ndarray /
float).  When no argument is a `Var` they return a plain value, so the same
forward code serves both inference and gradient evaluation.  Gradients are
exact reverse-mode derivatives; accumulation order is the reverse of node
creation order, which keeps results bitwise deterministic.
"""

from __future__ import annotations

import itertools

import numpy as np

_COUNTER = itertools.count()


class Var:
    """A value in the computation graph with an accumulated adjoint."""

    __slots__ = ("value", "grad", "_parents", "_vjp", "_order")

    def __init__(self, value, parents=(), vjp=None):
        self.value = value
        self.grad = None
        self._parents = parents
        self._vjp = vjp
        self._order = next(_COUNTER)

    def __repr__(self):
        return f"Var({self.value!r})"

    # operator sugar for readable model code
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


def value_of(x):
    return x.value if isinstance(x, Var) else x


def _is_tracked(*args) -> bool:
    return any(isinstance(a, Var) for a in args)


def _accumulate(var: Var, g):
    if var.grad is None:
        # copy: g may alias a child's adjoint buffer
        var.grad = np.array(g) if isinstance(g, np.ndarray) else g
    else:
        var.grad = var.grad + g


def _reduce_like(g, ref):
    """Sum an adjoint down to the shape of the value it belongs to."""
    if np.ndim(ref) == 0 and isinstance(g, np.ndarray):
        return float(np.sum(g))
    return g


def backward(root: Var) -> None:
    """Accumulate d(root)/d(node) into .grad over the graph below root."""
    if np.ndim(root.value) != 0:
        raise ValueError("backward requires a scalar root")
    nodes = []
    seen = set()
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        nodes.append(node)
        for p in node._parents:
            if isinstance(p, Var):
                stack.append(p)
    nodes.sort(key=lambda n: n._order, reverse=True)
    root.grad = 1.0
    for node in nodes:
        if node._vjp is not None and node.grad is not None:
            node._vjp(node.grad)


def add(a, b):
    va, vb = value_of(a), value_of(b)
    if not _is_tracked(a, b):
        return va + vb

    def vjp(g):
        if isinstance(a, Var):
            _accumulate(a, _reduce_like(g, va))
        if isinstance(b, Var):
            _accumulate(b, _reduce_like(g, vb))

    return Var(va + vb, (a, b), vjp)


def sub(a, b):
    va, vb = value_of(a), value_of(b)
    if not _is_tracked(a, b):
        return va - vb

    def vjp(g):
        if isinstance(a, Var):
            _accumulate(a, _reduce_like(g, va))
        if isinstance(b, Var):
            _accumulate(b, _reduce_like(-g, vb))

    return Var(va - vb, (a, b), vjp)


def mul(a, b):
    va, vb = value_of(a), value_of(b)
    if not _is_tracked(a, b):
        return va * vb

    def vjp(g):
        if isinstance(a, Var):
            _accumulate(a, _reduce_like(g * vb, va))
        if isinstance(b, Var):
            _accumulate(b, _reduce_like(g * va, vb))

    return Var(va * vb, (a, b), vjp)


def scale(a, c: float):
    va = value_of(a)
    if not isinstance(a, Var):
        return va * c

    def vjp(g):
        _accumulate(a, g * c)

    return Var(va * c, (a,), vjp)


def sin(a):
    va = value_of(a)
    if not isinstance(a, Var):
        return np.sin(va)

    def vjp(g):
        _accumulate(a, g * np.cos(va))

    return Var(np.sin(va), (a,), vjp)


def exp(a):
    va = value_of(a)
    if not isinstance(a, Var):
        return np.exp(va)
    out = np.exp(va)

    def vjp(g):
        _accumulate(a, g * out)

    return Var(out, (a,), vjp)


def correlate(a, offsets, weights, axis: int):
    """Circular correlation along an axis; adjoint is the reversed correlation."""
    va = value_of(a)

    def fwd(u):
        out = weights[0] * np.roll(u, -offsets[0], axis=axis)
        for o, w in zip(offsets[1:], weights[1:]):
            out += w * np.roll(u, -o, axis=axis)
        return out

    if not isinstance(a, Var):
        return fwd(va)

    def vjp(g):
        adj = weights[0] * np.roll(g, offsets[0], axis=axis)
        for o, w in zip(offsets[1:], weights[1:]):
            adj += w * np.roll(g, o, axis=axis)
        _accumulate(a, adj)

    return Var(fwd(va), (a,), vjp)


def lincomb(weights, xs, bias=None):
    """sum_i w_i * x_i (+ bias) with scalar weights and array (or scalar) terms.

    Fused into a single graph node; this is the hot path of every network
    layer, so it avoids one node per multiply-add.
    """
    vals = [value_of(x) for x in xs]
    wvals = [value_of(w) for w in weights]
    acc = None
    for w, v in zip(wvals, vals):
        term = w * v
        acc = term if acc is None else acc + term
    if bias is not None:
        bv = value_of(bias)
        acc = bv if acc is None else acc + bv
    if acc is None:
        acc = 0.0
    if not _is_tracked(*weights, *xs, *( [bias] if bias is not None else [] )):
        return acc

    parents = tuple(weights) + tuple(xs) + ((bias,) if bias is not None else ())

    def vjp(g):
        for w, x, v, wv in zip(weights, xs, vals, wvals):
            if isinstance(w, Var):
                _accumulate(w, float(np.sum(g * v)))
            if isinstance(x, Var):
                _accumulate(x, _reduce_like(g * wv, v))
        if bias is not None and isinstance(bias, Var):
            _accumulate(bias, float(np.sum(g)) if isinstance(g, np.ndarray) else g)

    return Var(acc, parents, vjp)


def sum_sq_diff(a, target):
    """sum((a - target)^2) reduced to a scalar."""
    va = value_of(a)
    diff = va - target
    out = float(np.sum(diff * diff))
    if not isinstance(a, Var):
        return out

    def vjp(g):
        _accumulate(a, (2.0 * g) * diff)

    return Var(out, (a,), vjp)


def abs_sum(weights):
    """sum_i |w_i| over scalar weights; subgradient 0 at w = 0."""
    wvals = [value_of(w) for w in weights]
    out = float(sum(abs(w) for w in wvals))
    if not _is_tracked(*weights):
        return out

    def vjp(g):
        for w, wv in zip(weights, wvals):
            if isinstance(w, Var):
                _accumulate(w, g * float(np.sign(wv)))

    return Var(out, tuple(weights), vjp)
