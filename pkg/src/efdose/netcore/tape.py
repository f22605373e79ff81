"""Reverse-mode automatic differentiation on numpy arrays (float64).

A Tensor records its parents and a vector-Jacobian closure when it is
produced by an op; backward() walks the tape in reverse topological order
and accumulates gradients. Non-Tensor operands are treated as constants,
which keeps graphs small. Everything is double precision: the targeted
regularization identities checked downstream need ~1e-8 resolution.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import NumericError


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def item(self) -> float:
        return float(self.value)

    def backward(self):
        if self.value.ndim != 0:
            raise ValueError("backward() starts from a scalar")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        for node in order:
            node.grad = None
        self.grad = np.ones(())
        for node in reversed(order):
            if node._vjp is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._vjp(node.grad)):
                if g is None:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.value)
                parent.grad = parent.grad + g

    # arithmetic -----------------------------------------------------------
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
        return mul(self, -1.0)

    def __pow__(self, p):
        return pow_const(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None):
        return tmean(self, axis=axis)


def _val(x):
    return x.value if isinstance(x, Tensor) else np.asarray(x, dtype=float)


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _binary(a, b, out_value, da, db):
    """Build the result tensor of a binary op with broadcasting-aware vjps."""
    parents = []
    grads = []
    if isinstance(a, Tensor):
        parents.append(a)
        grads.append(("a", a.value.shape))
    if isinstance(b, Tensor):
        parents.append(b)
        grads.append(("b", b.value.shape))
    if not parents:
        return Tensor(out_value)

    def vjp(g):
        out = []
        for which, shape in grads:
            raw = da(g) if which == "a" else db(g)
            out.append(_unbroadcast(raw, shape))
        return out

    return Tensor(out_value, tuple(parents), vjp)


def add(a, b):
    av, bv = _val(a), _val(b)
    return _binary(a, b, av + bv, lambda g: g, lambda g: g)


def sub(a, b):
    av, bv = _val(a), _val(b)
    return _binary(a, b, av - bv, lambda g: g, lambda g: -g)


def mul(a, b):
    av, bv = _val(a), _val(b)
    return _binary(a, b, av * bv, lambda g: g * bv, lambda g: g * av)


def div(a, b):
    av, bv = _val(a), _val(b)
    return _binary(a, b, av / bv, lambda g: g / bv, lambda g: -g * av / bv**2)


def pow_const(a, p):
    av = _val(a)
    p = float(p)
    out = av**p
    return Tensor(out, (a,), lambda g: (g * p * av ** (p - 1.0),)) if isinstance(a, Tensor) else Tensor(out)


def matmul(a, b):
    av, bv = _val(a), _val(b)
    out = av @ bv

    def da(g):
        if bv.ndim == 1:
            return np.outer(g, bv) if av.ndim == 2 else g * bv
        return g @ bv.T

    def db(g):
        if bv.ndim == 1:
            return av.T @ g if av.ndim == 2 else g * av
        return av.T @ g if av.ndim == 2 else np.outer(av, g)

    return _binary(a, b, out, da, db)


def _unary(a, out, dfn):
    if not isinstance(a, Tensor):
        return Tensor(out)
    return Tensor(out, (a,), lambda g: (dfn(g),))


def exp(a):
    out = np.exp(_val(a))
    return _unary(a, out, lambda g: g * out)


def log(a):
    av = _val(a)
    return _unary(a, np.log(av), lambda g: g / av)


def log1p(a):
    av = _val(a)
    return _unary(a, np.log1p(av), lambda g: g / (1.0 + av))


def sigmoid(a):
    out = expit(_val(a))
    return _unary(a, out, lambda g: g * out * (1.0 - out))


def softplus(a):
    av = _val(a)
    s = expit(av)
    return _unary(a, np.logaddexp(0.0, av), lambda g: g * s)


def sin(a):
    av = _val(a)
    return _unary(a, np.sin(av), lambda g: g * np.cos(av))


def relu(a):
    av = _val(a)
    mask = av > 0
    return _unary(a, np.where(mask, av, 0.0), lambda g: g * mask)


def clip(a, lo=None, hi=None):
    """Clamp to constant bounds; zero gradient outside (subgradient inside)."""
    av = _val(a)
    out = np.clip(av, lo, hi)
    inside = np.ones_like(av, dtype=bool)
    if lo is not None:
        inside &= av >= lo
    if hi is not None:
        inside &= av <= hi
    return _unary(a, out, lambda g: g * inside)


def tsum(a, axis=None, keepdims=False):
    av = _val(a)
    out = av.sum(axis=axis, keepdims=keepdims)

    def dfn(g):
        if axis is None:
            return np.broadcast_to(g, av.shape).copy()
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, av.shape).copy()

    return _unary(a, out, dfn)


def tmean(a, axis=None):
    av = _val(a)
    count = av.size if axis is None else av.shape[axis]
    return tsum(a, axis=axis) * (1.0 / count)


def gather_cols(a, idx):
    """out[i] = a[i, idx[i]] for a (n, m) tensor and integer index vector."""
    av = _val(a)
    idx = np.asarray(idx, dtype=int)
    rows = np.arange(av.shape[0])
    out = av[rows, idx]

    def dfn(g):
        full = np.zeros_like(av)
        np.add.at(full, (rows, idx), g)
        return full

    return _unary(a, out, dfn)


def take_col(a, i):
    """Column i of a (n, m) tensor as a length-n tensor."""
    av = _val(a)
    i = int(i)
    out = av[:, i]

    def dfn(g):
        full = np.zeros_like(av)
        full[:, i] = g
        return full

    return _unary(a, out, dfn)


def where_const(mask, a, b):
    """Elementwise select with a constant boolean mask."""
    mask = np.asarray(mask, dtype=bool)
    av, bv = _val(a), _val(b)
    out = np.where(mask, av, bv)
    return _binary(
        a,
        b,
        out,
        lambda g: np.where(mask, g, 0.0),
        lambda g: np.where(mask, 0.0, g),
    )


def softmax_rows(a):
    """Row-wise softmax of a (n, m) tensor (shift-invariant, exact gradient)."""
    av = _val(a)
    shifted = sub(a, av.max(axis=1, keepdims=True))
    e = exp(shifted)
    return div(e, tsum(e, axis=1, keepdims=True))


def stop_gradient(a):
    """Detach: same value, no parents."""
    return Tensor(_val(a).copy())


def vc_dense(bvals, alpha, x):
    """Varying-coefficient contraction y[n,o] = sum_l bvals[n,l] (x @ alpha[l])[n,o].

    `bvals` is a constant basis matrix; alpha and x may be tensors.
    """
    from .. import _kernels

    bvals = np.ascontiguousarray(bvals, dtype=float)
    av, xv = _val(alpha), _val(x)
    out = _kernels.vc_forward(bvals, av, xv)
    parents = tuple(t for t in (alpha, x) if isinstance(t, Tensor))
    if not parents:
        return Tensor(out)

    def vjp(g):
        galpha, gx = _kernels.vc_backward(bvals, av, xv, np.ascontiguousarray(g))
        grads = []
        if isinstance(alpha, Tensor):
            grads.append(galpha)
        if isinstance(x, Tensor):
            grads.append(gx)
        return grads

    return Tensor(out, parents, vjp)


def check_finite(t: Tensor, what: str) -> Tensor:
    """Raise NumericError (with the first offending index) on non-finite entries."""
    finite = np.isfinite(t.value)
    if not np.all(finite):
        idx = int(np.argmax(~np.ravel(finite)))
        raise NumericError(f"non-finite {what} at flat index {idx}")
    return t
