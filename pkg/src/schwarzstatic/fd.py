"""Finite-difference operators on uniform radial grids.

Interior rows use centered 5-point stencils (4th order).  The two rows at
each end use one-sided 6-point stencils of order 5: the extra edge order
keeps composed operators (first derivative applied twice) uniformly 4th
order, which plain 4th-order closures would not, because their row-dependent
error constants inject an h^3 term under a second differentiation.
"""

from __future__ import annotations

from math import factorial

import numpy as np

__all__ = ["stencil_coefficients", "d1_matrix", "d2_matrix", "uniform_grid"]


def stencil_coefficients(offsets, order: int) -> np.ndarray:
    """Weights c_j with sum_j c_j f(x + o_j h) = h^order f^(order)(x) + h.o.t."""
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    if order >= n:
        raise ValueError("need more points than the derivative order")
    v = np.vander(offsets, n, increasing=True).T  # v[p, j] = o_j^p
    rhs = np.zeros(n)
    rhs[order] = factorial(order)
    c = np.linalg.solve(v, rhs)
    # re-impose the zero-sum constraint exactly so constants are annihilated
    j = int(np.argmax(np.abs(c)))
    c[j] -= c.sum()
    return c


def uniform_grid(a: float, b: float, n: int) -> np.ndarray:
    if n < 7:
        raise ValueError("need at least 7 nodes for the stencil set")
    return np.linspace(a, b, n)


def _derivative_matrix(n: int, h: float, order: int, edge_points: int) -> np.ndarray:
    if n < max(7, edge_points):
        raise ValueError("grid too small for the stencil set")
    d = np.zeros((n, n))
    center = stencil_coefficients([-2, -1, 0, 1, 2], order) / h**order
    for row in range(2, n - 2):
        d[row, row - 2 : row + 3] = center
    for row in (0, 1):
        offs = np.arange(edge_points) - row
        d[row, row : row + edge_points - row] = 0.0  # cleared below by full fill
        c = stencil_coefficients(offs, order) / h**order
        d[row, : edge_points] = 0.0
        d[row, row + offs.astype(int)] = c
    for row in (n - 2, n - 1):
        back = n - 1 - row
        offs = -(np.arange(edge_points) - back)[::-1]
        c = stencil_coefficients(offs, order) / h**order
        d[row, row + offs.astype(int)] = c
    return d


def d1_matrix(n: int, h: float) -> np.ndarray:
    """First derivative: centered 4th order inside, order-5 one-sided edges."""
    return _derivative_matrix(n, h, order=1, edge_points=6)


def d2_matrix(n: int, h: float) -> np.ndarray:
    """Second derivative: centered 4th order inside, order-5 one-sided edges."""
    return _derivative_matrix(n, h, order=2, edge_points=7)
