"""Small dense linear-algebra helpers shared by the solver modules."""

import warnings

import numpy as np


def vec(a):
    """Column-major vectorization of a matrix."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(x, rows, cols):
    """Inverse of :func:`vec`: fill a (rows, cols) matrix column by column."""
    x = np.asarray(x)
    if x.size != rows * cols:
        raise ValueError(
            f"cannot reshape length-{x.size} vector into {rows}x{cols} matrix"
        )
    return x.reshape((rows, cols), order="F")


def principal_eigvec(a, tol=1e-10, max_iter=10000):
    """Principal eigenvector of a Hermitian PSD matrix by power iteration.

    The start vector is the first canonical basis vector plus a small fixed
    ramp, so repeated calls return the same vector (up to a global phase
    fixed by the start).
    """
    a = np.asarray(a)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    v = np.zeros(n, dtype=complex)
    v[0] = 1.0
    v += 1e-3 / (1.0 + np.arange(n))
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        u = a @ v
        norm_u = np.linalg.norm(u)
        if norm_u == 0.0:
            # zero matrix: every unit vector is an eigenvector
            return v
        u /= norm_u
        if 1.0 - abs(np.vdot(v, u)) <= tol:
            return u
        v = u
    warnings.warn("power iteration did not converge; returning last iterate")
    return v
