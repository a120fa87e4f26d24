"""
Level-set geometry, phase indexing and material assignment.

Each level set splits the plane into the region below the iso-level
(characteristic value 0) and above it (value 1). With ``n`` level sets a point
receives the phase index ``P = sum_j 2**j * f_j`` (0-based ``j``), and a
:class:`PhaseMap` turns phases into material indices, 0 being void.

Level sets are plain callables mapping an ``(npts, 2)`` array to values. Two
families are provided: closed-form shapes (:class:`Plane`, :class:`Circle`,
:class:`RotatedBox`) and spline fields with coefficients on a background
basis (:class:`LevelSetField`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .splines import TensorBSplineBasis, eval_basis_and_derivs

ON_INTERFACE = -1

__all__ = [
    "ON_INTERFACE",
    "Plane",
    "Circle",
    "RotatedBox",
    "LevelSetField",
    "Material",
    "MaterialTable",
    "PhaseMap",
    "eval_levelset",
    "phase_index",
    "phase_indices",
    "snap_values",
]


@dataclass(frozen=True)
class Plane:
    """Signed distance ``n . (x - point)`` to a line; negative behind the normal."""

    normal: tuple[float, float]
    point: tuple[float, float] = (0.0, 0.0)
    iso: float = 0.0

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = np.asarray(self.normal, dtype=float)
        n = n / np.linalg.norm(n)
        return (pts - np.asarray(self.point, dtype=float)) @ n


@dataclass(frozen=True)
class Circle:
    """Signed distance to a circle, negative inside."""

    center: tuple[float, float]
    radius: float
    iso: float = 0.0

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = pts - np.asarray(self.center, dtype=float)
        return np.hypot(d[:, 0], d[:, 1]) - self.radius


@dataclass(frozen=True)
class RotatedBox:
    """Signed distance to a rectangle rotated by ``angle`` (radians) about its center."""

    center: tuple[float, float]
    half_widths: tuple[float, float]
    angle: float = 0.0
    iso: float = 0.0

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        c, s = np.cos(self.angle), np.sin(self.angle)
        d = pts - np.asarray(self.center, dtype=float)
        local = np.stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]], axis=1)
        q = np.abs(local) - np.asarray(self.half_widths, dtype=float)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        return outside + inside


@dataclass(frozen=True)
class LevelSetField:
    """Level set discretised with B-spline coefficients on ``basis``."""

    basis: TensorBSplineBasis
    coefficients: np.ndarray
    iso: float = 0.0

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float).ravel()
        if coef.size != self.basis.n_basis:
            raise ValueError(
                f"expected {self.basis.n_basis} coefficients, got {coef.size}")
        object.__setattr__(self, "coefficients", coef)

    @classmethod
    def interpolate_nodes(cls, basis: TensorBSplineBasis, func: Callable, iso: float = 0.0):
        """Coefficients from nodal samples of ``func`` at the Greville points."""
        def greville(kv):
            p = kv.degree
            t = kv.knots
            return np.array([t[i + 1: i + p + 1].mean() for i in range(kv.n_basis)])
        gx, gy = greville(basis.kv_x), greville(basis.kv_y)
        X, Y = np.meshgrid(gx, gy)
        vals = func(np.column_stack([X.ravel(), Y.ravel()]))
        return cls(basis, vals, iso)

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        b = self.basis
        p = b.degree
        e = b.locate(pts)
        nx = b.shape[0]
        ix, iy = e % nx, e // nx
        X = np.empty((len(pts), p + 1))
        Y = np.empty((len(pts), p + 1))
        for i in np.unique(ix):
            m = ix == i
            X[m] = eval_basis_and_derivs(b.kv_x, pts[m, 0], 0, span=i + p)[0]
        for j in np.unique(iy):
            m = iy == j
            Y[m] = eval_basis_and_derivs(b.kv_y, pts[m, 1], 0, span=j + p)[0]
        n1 = b.kv_x.n_basis
        coef = self.coefficients.reshape(-1, n1)
        a = np.arange(p + 1)
        rows = iy[:, None, None] + a[None, :, None]
        cols = ix[:, None, None] + a[None, None, :]
        return np.einsum("pj,pi,pji->p", Y, X, coef[rows, cols])


def eval_levelset(lsf: Callable, x) -> float:
    """Value of a level set at a single point."""
    return float(lsf(np.asarray(x, dtype=float)[None, :])[0])


def snap_values(values, iso: float, eps: float) -> np.ndarray:
    """Move values within ``eps`` of the iso-level to ``iso + eps``."""
    values = np.array(values, dtype=float, copy=True)
    values[np.abs(values - iso) <= eps] = iso + eps
    return values


def phase_index(values: Sequence[float], iso: float = 0.0, eps: float = 0.0) -> int:
    """Phase index of one point from its level-set values.

    Returns :data:`ON_INTERFACE` if any value lies within ``eps`` of ``iso``.
    """
    values = np.asarray(values, dtype=float)
    if np.any(np.abs(values - iso) <= eps):
        return ON_INTERFACE
    f = (values > iso).astype(int)
    return int(np.sum(f << np.arange(len(f))))


def phase_indices(values: np.ndarray, iso=0.0) -> np.ndarray:
    """Vectorised phase index for values of shape ``(n_levelsets, npts)``.

    ``iso`` may be a scalar or one value per level set. Values are assumed to
    be snapped already, so no point lies on an iso-contour.
    """
    values = np.atleast_2d(values)
    iso = np.broadcast_to(np.asarray(iso, dtype=float), (values.shape[0],))
    f = (values > iso[:, None]).astype(np.int64)
    weights = (1 << np.arange(values.shape[0], dtype=np.int64))
    return weights @ f


@dataclass(frozen=True)
class Material:
    E: float = 1.0
    nu: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if not (self.E > 0 and self.kappa > 0 and 0.0 <= self.nu < 0.5):
            raise ConfigurationError(
                f"invalid material E={self.E}, nu={self.nu}, kappa={self.kappa}")


@dataclass(frozen=True)
class MaterialTable:
    """Materials keyed by index; index 0 is reserved for void."""

    materials: dict[int, Material] = field(default_factory=dict)

    def __post_init__(self):
        if 0 in self.materials:
            raise ConfigurationError("material index 0 is reserved for void")

    def __getitem__(self, index: int) -> Material:
        try:
            return self.materials[index]
        except KeyError:
            raise ConfigurationError(f"material {index} is not defined") from None

    def __contains__(self, index: int) -> bool:
        return index in self.materials


@dataclass(frozen=True)
class PhaseMap:
    """Map from phase index ``P in [0, 2**n)`` to material index."""

    n_levelsets: int
    table: tuple[int, ...]

    def __post_init__(self):
        table = tuple(int(m) for m in self.table)
        object.__setattr__(self, "table", table)
        if self.n_levelsets < 1:
            raise ConfigurationError("at least one level set is required")
        if len(table) != 2 ** self.n_levelsets:
            raise ConfigurationError(
                f"phase map needs {2 ** self.n_levelsets} entries, got {len(table)}")
        if any(m < 0 for m in table):
            raise ConfigurationError("material indices must be non-negative")

    @classmethod
    def from_dict(cls, n_levelsets: int, mapping: dict[int, int]) -> "PhaseMap":
        size = 2 ** n_levelsets
        missing = [P for P in range(size) if P not in mapping]
        if missing:
            raise ConfigurationError(f"phase {missing[0]} has no material entry")
        extra = [P for P in mapping if not 0 <= P < size]
        if extra:
            raise ConfigurationError(f"phase {extra[0]} out of range for {n_levelsets} level sets")
        return cls(n_levelsets, tuple(mapping[P] for P in range(size)))

    @classmethod
    def from_function(cls, n_levelsets: int, func: Callable[[tuple[int, ...]], int]) -> "PhaseMap":
        """Build the table from a function of the characteristic-value tuple."""
        table = []
        for P in range(2 ** n_levelsets):
            bits = tuple((P >> j) & 1 for j in range(n_levelsets))
            table.append(func(bits))
        return cls(n_levelsets, tuple(table))

    def material_of(self, P: int) -> int:
        if not 0 <= P < len(self.table):
            raise ConfigurationError(
                f"phase {P} out of range for {self.n_levelsets} level sets")
        return self.table[P]

    def materials_of(self, P: np.ndarray) -> np.ndarray:
        return np.asarray(self.table, dtype=np.int64)[P]

    def validate(self, materials: MaterialTable):
        for P, M in enumerate(self.table):
            if M != 0 and M not in materials:
                raise ConfigurationError(f"phase {P} refers to undefined material {M}")
