"""Quadrature rules for triangles, quads and segments."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from skfem.quadrature import get_quadrature_tri

# polynomial degree of the symmetric triangle rule used for each basis order:
# 7, 12 and 25 points for linear, quadratic and cubic bases
_TRIANGLE_DEGREE = {1: 5, 2: 6, 3: 10}


def _triangle_degree(order: int) -> int:
    if order < 1:
        raise ValueError(f"unsupported quadrature order {order}")
    return _TRIANGLE_DEGREE.get(order, min(2 * order, 19))


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points ``(npts, 3)`` and weights summing to 1."""
    X, W = get_quadrature_tri(_triangle_degree(order))
    lam = np.column_stack([1.0 - X[0] - X[1], X[0], X[1]])
    w = np.asarray(W, dtype=float)
    w = w / w.sum()
    lam.setflags(write=False)
    w.setflags(write=False)
    return lam, w


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points on [0, 1] and weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = (x + 1.0) / 2.0
    w = w / 2.0
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def triangles_quadrature(tri: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Points ``(ntri * nq, 2)`` and weights for a stack of triangles ``(ntri, 3, 2)``."""
    lam, w = triangle_rule(order)
    tri = np.asarray(tri, dtype=float).reshape(-1, 3, 2)
    pts = np.einsum("qa,tad->tqd", lam, tri).reshape(-1, 2)
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return pts, (area[:, None] * w[None, :]).ravel()


def quads_quadrature(lo: np.ndarray, hi: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule with ``order + 1`` points per direction on boxes."""
    x, w = gauss_rule(order + 1)
    lo = np.asarray(lo, dtype=float).reshape(-1, 2)
    hi = np.asarray(hi, dtype=float).reshape(-1, 2)
    size = hi - lo
    gx, gy = np.meshgrid(x, x)
    ref = np.column_stack([gx.ravel(), gy.ravel()])
    wref = np.outer(w, w).ravel()
    pts = lo[:, None, :] + size[:, None, :] * ref[None, :, :]
    wts = (size[:, 0] * size[:, 1])[:, None] * wref[None, :]
    return pts.reshape(-1, 2), wts.ravel()


def segment_quadrature(p0, p1, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss points on the straight segment ``p0 -> p1``; weights sum to its length."""
    x, w = gauss_rule(n)
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.linalg.norm(p1 - p0))
    return p0[None, :] + x[:, None] * (p1 - p0)[None, :], w * length
