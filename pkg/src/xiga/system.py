"""Global sparse assembly, direct solution and the Frobenius condition number."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError

log = logging.getLogger(__name__)

DENSE_THRESHOLD = 6000


@dataclass
class SparseSystem:
    """Square CSR matrix ``A`` and right-hand side ``f``."""

    A: sp.csr_matrix
    f: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def write_matrix_market(self, path: str | Path):
        scipy.io.mmwrite(str(path), self.A)


@dataclass
class SolveReport:
    u: np.ndarray
    residual: float
    condition: float | None = None
    status: str = "ok"


def _ordered_sum(keys: np.ndarray, vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum ``vals`` per key in an order that depends only on the multiset of entries."""
    order = np.lexsort((vals, keys))
    keys, vals = keys[order], vals[order]
    if len(keys) == 0:
        return keys, vals
    start = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    return keys[start], np.add.reduceat(vals, start)


def assemble(contributions: Iterable, n: int) -> SparseSystem:
    """Sum contributions into an ``n x n`` system.

    Duplicate entries are reduced after sorting by position and value, so the
    result is bitwise independent of the order of ``contributions``.
    """
    rows, cols, vals, frows, fvals = [], [], [], [], []
    for c in contributions:
        rows.append(c.rows)
        cols.append(c.cols)
        vals.append(c.vals)
        frows.append(c.frows)
        fvals.append(c.fvals)
    cat = lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dtype=dt)
    r, c, v = cat(rows, np.int64), cat(cols, np.int64), cat(vals, float)
    fr, fv = cat(frows, np.int64), cat(fvals, float)
    for name, idx in (("row", r), ("column", c), ("load row", fr)):
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise IndexError(f"{name} index out of range for a system of size {n}")
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(fv))):
        raise SolverError("non-finite value in assembled contributions")
    keys, sums = _ordered_sum(r * n + c, v)
    A = sp.csr_matrix((sums, (keys // n, keys % n)), shape=(n, n))
    A.sort_indices()
    fk, fs = _ordered_sum(fr, fv)
    f = np.zeros(n)
    f[fk] = fs
    return SparseSystem(A, f)


def solve(system: SparseSystem, tol: float = 1e-8, refine: int = 3) -> SolveReport:
    """Sparse LU solve with a few steps of iterative refinement.

    Raises :class:`SolverError` for singular matrices or when the relative
    residual stays above ``tol``.
    """
    if system.n < 1:
        raise SolverError("empty system")
    A = system.A.tocsc()
    f = system.f
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from exc
    diag = np.abs(lu.U.diagonal())
    if diag.size and (diag.min() == 0.0 or not np.all(np.isfinite(diag))):
        raise SolverError(f"singular matrix: smallest pivot {diag.min():.3e}")
    u = lu.solve(f)
    fnorm = np.linalg.norm(f)
    scale = fnorm if fnorm > 0 else 1.0
    res = np.linalg.norm(A @ u - f) / scale
    for _ in range(refine):
        if res <= 1e-14:
            break
        du = lu.solve(f - A @ u)
        u_new = u + du
        res_new = np.linalg.norm(A @ u_new - f) / scale
        if not res_new < res:
            break
        u, res = u_new, res_new
    if not np.all(np.isfinite(u)):
        raise SolverError("solution contains non-finite values")
    if res > tol:
        raise SolverError(
            f"relative residual {res:.3e} exceeds {tol:.1e} "
            f"(pivot range {diag.min():.3e} .. {diag.max():.3e})")
    return SolveReport(u, float(res))


def condition_number(system: SparseSystem | sp.spmatrix | np.ndarray,
                     threshold: int = DENSE_THRESHOLD) -> float:
    """``||A^-1||_F ||A||_F`` by dense inversion."""
    A = system.A if isinstance(system, SparseSystem) else system
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    n = A.shape[0]
    if n > threshold:
        raise ValueError(f"system size {n} exceeds the dense threshold {threshold}")
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular matrix: {exc}") from exc
    if not np.all(np.isfinite(Ainv)):
        raise SolverError("singular matrix: inverse is not finite")
    cond = float(np.linalg.norm(Ainv, "fro") * np.linalg.norm(A, "fro"))
    if cond > 1e15:
        log.info("condition number %.3e is beyond double precision; magnitude only", cond)
    return cond
