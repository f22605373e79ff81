"""Pure-numpy kernels: batched B-spline evaluation and the varying-coefficient
dense contraction. Signature-compatible with the compiled core in _core.pyx."""
import numpy as np

NAME = "numpy"


def bspline_basis(a, knots, degree):
    """All basis values at each point of `a` for the clamped knot vector.

    a: (n,) points in [0, 1]; knots: full knot vector (length K + degree + 1);
    returns (n, K). Half-open span convention, closed at the right endpoint.
    """
    a = np.ascontiguousarray(a, dtype=float)
    t = np.ascontiguousarray(knots, dtype=float)
    p = int(degree)
    n = a.shape[0]
    nk = t.shape[0]
    K = nk - p - 1
    last = t[-1]
    # zero-degree level: one indicator per knot span
    m = nk - 1
    N = np.zeros((n, m))
    av = a[:, None]
    lo = t[None, :-1]
    hi = t[None, 1:]
    closed_right = (hi == last) & (lo < hi)
    N[(av >= lo) & ((av < hi) | (closed_right & (av == last)))] = 1.0
    for d in range(1, p + 1):
        cols = m - d
        Nd = np.zeros((n, cols))
        for k in range(cols):
            den1 = t[k + d] - t[k]
            den2 = t[k + d + 1] - t[k + 1]
            if den1 > 0:
                Nd[:, k] += (a - t[k]) / den1 * N[:, k]
            if den2 > 0:
                Nd[:, k] += (t[k + d + 1] - a) / den2 * N[:, k + 1]
        N = Nd
    return np.ascontiguousarray(N[:, :K])


def bspline_basis_derivative(a, knots, degree):
    """d/da of each basis function at each point of `a`; returns (n, K)."""
    a = np.ascontiguousarray(a, dtype=float)
    t = np.ascontiguousarray(knots, dtype=float)
    p = int(degree)
    K = t.shape[0] - p - 1
    n = a.shape[0]
    if p == 0:
        return np.zeros((n, K))
    lower = bspline_basis(a, knots, p - 1)  # (n, K + 1) lower-degree functions
    out = np.zeros((n, K))
    for k in range(K):
        den1 = t[k + p] - t[k]
        den2 = t[k + p + 1] - t[k + 1]
        if den1 > 0:
            out[:, k] += p / den1 * lower[:, k]
        if den2 > 0:
            out[:, k] -= p / den2 * lower[:, k + 1]
    return out


def vc_forward(bvals, alpha, x):
    """y[n,o] = sum_{l,i} bvals[n,l] * alpha[l,i,o] * x[n,i]."""
    L = alpha.shape[0]
    n = x.shape[0]
    out = np.zeros((n, alpha.shape[2]))
    for l in range(L):
        out += (x @ alpha[l]) * bvals[:, l : l + 1]
    return out


def vc_backward(bvals, alpha, x, gout):
    """Gradients of vc_forward wrt alpha and x for upstream gradient gout."""
    L = alpha.shape[0]
    galpha = np.empty_like(alpha)
    gx = np.zeros_like(x)
    for l in range(L):
        gb = gout * bvals[:, l : l + 1]
        galpha[l] = x.T @ gb
        gx += (gb @ alpha[l].T)
    return galpha, gx
