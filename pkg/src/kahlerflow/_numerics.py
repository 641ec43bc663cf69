"""Finite-difference and quadrature primitives on a uniform 1-D grid."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import bernoulli


def fornberg_weights(x0: float, x: np.ndarray, order: int) -> np.ndarray:
    """Weights of the derivative of the given order at ``x0`` from nodes ``x``.

    Fornberg's recursion; returns an array of length ``len(x)``.
    """
    x = np.asarray(x, dtype=float)
    m = len(x)
    c = np.zeros((m, order + 1))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, m):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


@lru_cache(maxsize=64)
def diff_matrix(npts: int, length: float, order: int, half_width: int = 4) -> np.ndarray:
    """Dense differentiation matrix on ``npts`` uniform nodes spanning ``[0, length]``.

    Interior rows use the centred ``2*half_width+1`` point stencil. Rows near the
    ends use a one-sided stencil of the same width, widened by one node per
    derivative order above two to hold the accuracy of high derivatives.
    """
    x = np.linspace(0.0, length, npts)
    width = 2 * half_width + 1 + max(0, order - 2)
    if width > npts:
        raise ValueError("grid too small for the stencil")
    D = np.zeros((npts, npts))
    for i in range(npts):
        if half_width <= i < npts - half_width and order <= 2:
            lo = i - half_width
            hi = i + half_width + 1
        else:
            lo = min(max(i - width // 2, 0), npts - width)
            hi = lo + width
        D[i, lo:hi] = fornberg_weights(x[i], x[lo:hi], order)
    D.setflags(write=False)
    return D


@lru_cache(maxsize=64)
def gregory_weights(npts: int, length: float, corrections: int = 6) -> np.ndarray:
    """Trapezoid weights with Gregory end corrections.

    Exact for polynomials of degree below ``corrections``; the error on smooth
    integrands decays like ``h**corrections``.
    """
    m = corrections
    if npts < 2 * m:
        raise ValueError("grid too small for the end corrections")
    h = length / (npts - 1)
    B = bernoulli(m + 1)
    idx = np.arange(m, dtype=float)
    A = np.vander(idx, m, increasing=True).T
    rhs = np.array([B[j + 1] / (j + 1) if j % 2 == 1 else 0.0 for j in range(m)])
    d = np.linalg.solve(A, rhs)
    w = np.ones(npts)
    w[0] = w[-1] = 0.5
    w[:m] += d
    w[-m:] += d[::-1]
    w *= h
    w.setflags(write=False)
    return w
