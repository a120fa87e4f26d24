"""
Univariate and tensor-product B-spline bases with Lagrange extraction.

Knot vectors are open and uniform and are expressed directly in physical
coordinates, so parametric and physical derivatives coincide. Background
elements are the tensor products of the nonempty knot spans.

Evaluation follows the Cox-de Boor recursion (Algorithm A2.3 of Piegl and
Tiller, *The NURBS Book*), vectorised over evaluation points. When the span
is forced, the same routine returns the polynomial piece of that span
evaluated anywhere, which is how polynomial extensions across element
boundaries are obtained.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "KnotVector",
    "TensorBSplineBasis",
    "ExtractionOperator",
    "TensorEval",
    "find_span",
    "eval_basis_and_derivs",
    "tensor_eval",
    "extraction_operator",
    "gauss_lobatto_points",
    "lagrange_derivs",
]


@dataclass(frozen=True)
class KnotVector:
    """Open knot vector of degree ``degree``.

    Parameters
    ----------
    knots : array_like
        Non-decreasing knot values with the first and last ones repeated
        ``degree + 1`` times.
    degree : int
        Polynomial degree, at least 1.
    """

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        p = int(self.degree)
        if p < 1:
            raise ValueError(f"degree must be >= 1, got {p}")
        if knots.ndim != 1 or np.any(np.diff(knots) < 0.0):
            raise ValueError("knots must be a non-decreasing 1D sequence")
        if len(knots) - p - 1 < p + 1:
            raise ValueError("too few knots for the requested degree")
        if np.any(knots[: p + 1] != knots[0]) or np.any(knots[-p - 1:] != knots[-1]):
            raise ValueError("knot vector must be open (end knots repeated p+1 times)")
        interior = knots[p + 1: -p - 1]
        if len(interior) and np.any(np.diff(knots[p:-p]) == 0.0):
            raise ValueError("repeated interior knots are not supported")

    @classmethod
    def uniform(cls, degree: int, start: float, end: float, n_elements: int) -> "KnotVector":
        if n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        if not end > start:
            raise ValueError("end must be larger than start")
        breaks = np.linspace(start, end, n_elements + 1)
        knots = np.concatenate([[start] * degree, breaks, [end] * degree])
        return cls(knots, degree)

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def breakpoints(self) -> np.ndarray:
        return self.knots[self.degree: len(self.knots) - self.degree]

    @property
    def n_elements(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def start(self) -> float:
        return float(self.knots[0])

    @property
    def end(self) -> float:
        return float(self.knots[-1])


def find_span(kv: KnotVector, xi: float) -> int:
    """Return the knot index ``i`` with ``knots[i] <= xi < knots[i+1]``.

    The right end of the parameter range is mapped to the last nonempty span.
    Raises ``ValueError`` for points outside the knot range.
    """
    xi = float(xi)
    t = kv.knots
    if not (t[0] <= xi <= t[-1]):
        raise ValueError(f"parameter {xi} outside knot range [{t[0]}, {t[-1]}]")
    p = kv.degree
    n = kv.n_basis
    if xi >= t[n]:
        return n - 1
    return int(np.searchsorted(t, xi, side="right") - 1)


def _span_of_element(kv: KnotVector, element: int) -> int:
    return element + kv.degree


def eval_basis_and_derivs(kv: KnotVector, xi, max_order: int = 0, span: int | None = None) -> np.ndarray:
    """Evaluate the ``p + 1`` nonzero basis functions and their derivatives.

    Parameters
    ----------
    kv : KnotVector
    xi : float or array_like
        Evaluation point(s). Points outside the span are allowed when ``span``
        is given; the polynomial piece of that span is then extended.
    max_order : int
        Highest derivative order, at most the degree.
    span : int, optional
        Knot span index. Located with :func:`find_span` when omitted, in which
        case ``xi`` must be a scalar.

    Returns
    -------
    ders : ndarray
        Shape ``(max_order + 1, p + 1)`` for scalar input, otherwise
        ``(max_order + 1, npts, p + 1)``. Entry ``[k, ..., j]`` is the k-th
        derivative of basis function ``span - p + j``.
    """
    p = kv.degree
    if max_order > p:
        raise ValueError(f"max_order={max_order} exceeds degree {p}")
    if max_order < 0:
        raise ValueError("max_order must be non-negative")
    scalar = np.ndim(xi) == 0
    if span is None:
        if not scalar:
            raise ValueError("span must be given for array input")
        span = find_span(kv, xi)
    x = np.atleast_1d(np.asarray(xi, dtype=float))
    t = kv.knots
    npts = x.shape[0]

    ndu = np.zeros((p + 1, p + 1, npts))
    left = np.zeros((p + 1, npts))
    right = np.zeros((p + 1, npts))
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - t[span + 1 - j]
        right[j] = t[span + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((max_order + 1, p + 1, npts))
    ders[0] = ndu[:, p]
    a = np.zeros((2, p + 1, npts))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, max_order + 1):
            d = np.zeros(npts)
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d = d + a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, max_order + 1):
        ders[k] *= fac
        fac *= p - k
    ders = np.moveaxis(ders, 2, 1)
    if scalar:
        return ders[:, 0, :]
    return ders


def gauss_lobatto_points(p: int) -> np.ndarray:
    """Gauss-Lobatto nodes on [-1, 1] for a degree-``p`` nodal basis."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return np.array([-1.0, 1.0])
    interior = np.polynomial.legendre.Legendre.basis(p).deriv().roots()
    return np.concatenate([[-1.0], np.sort(interior.real), [1.0]])


def _lagrange_coefficients(nodes: np.ndarray) -> np.ndarray:
    # column j holds monomial coefficients of the j-th Lagrange polynomial
    vander = np.vander(nodes, increasing=True)
    return np.linalg.inv(vander)


def lagrange_derivs(nodes: np.ndarray, s, max_order: int) -> np.ndarray:
    """Lagrange basis on ``nodes`` and its derivatives at reference points ``s``.

    Returns an array of shape ``(max_order + 1, npts, len(nodes))``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    coef = _lagrange_coefficients(np.asarray(nodes, dtype=float))
    out = np.zeros((max_order + 1, s.size, len(nodes)))
    for k in range(max_order + 1):
        ck = np.polynomial.polynomial.polyder(coef, k, axis=0) if k else coef
        out[k] = np.polynomial.polynomial.polyval(s, ck).T if ck.size else 0.0
    return out


@dataclass(frozen=True)
class ExtractionOperator:
    """Maps an elemental Lagrange basis to the B-splines supported on it.

    ``B[k](x) = sum_j C[k, j] * Lag[j](x)`` for every x in the element, with
    ``k`` indexing ``global_ids``.
    """

    element: int
    C: np.ndarray
    global_ids: np.ndarray


@dataclass(frozen=True)
class TensorEval:
    """Nonzero basis functions at a point.

    ``dx[k]`` and ``dy[k]`` hold the k-th pure partial derivatives in x and y.
    """

    ids: np.ndarray
    values: np.ndarray
    gradients: np.ndarray
    dx: np.ndarray
    dy: np.ndarray


@dataclass(frozen=True)
class TensorBSplineBasis:
    """Tensor-product B-spline basis on an axis-aligned rectangle.

    Flat basis id ``k = i + n1 * j`` and flat element id ``e = ix + nx * iy``.
    Local basis functions of an element are numbered ``a = ax + (p + 1) * ay``.
    """

    kv_x: KnotVector
    kv_y: KnotVector
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kv_x.degree != self.kv_y.degree:
            raise ValueError("degree must be equal in both directions")

    @classmethod
    def uniform(cls, degree: int, box, shape) -> "TensorBSplineBasis":
        (x0, y0), (x1, y1) = box
        nx, ny = shape
        return cls(KnotVector.uniform(degree, x0, x1, nx), KnotVector.uniform(degree, y0, y1, ny))

    @property
    def degree(self) -> int:
        return self.kv_x.degree

    @property
    def shape(self) -> tuple[int, int]:
        return self.kv_x.n_elements, self.kv_y.n_elements

    @property
    def n_elements(self) -> int:
        nx, ny = self.shape
        return nx * ny

    @property
    def basis_shape(self) -> tuple[int, int]:
        return self.kv_x.n_basis, self.kv_y.n_basis

    @property
    def n_basis(self) -> int:
        n1, n2 = self.basis_shape
        return n1 * n2

    @property
    def n_local(self) -> int:
        return (self.degree + 1) ** 2

    @property
    def box(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return (self.kv_x.start, self.kv_y.start), (self.kv_x.end, self.kv_y.end)

    @property
    def h(self) -> tuple[float, float]:
        nx, ny = self.shape
        (x0, y0), (x1, y1) = self.box
        return (x1 - x0) / nx, (y1 - y0) / ny

    def element_index(self, e: int) -> tuple[int, int]:
        nx, _ = self.shape
        return e % nx, e // nx

    def element_bounds(self, e: int) -> tuple[np.ndarray, np.ndarray]:
        ix, iy = self.element_index(e)
        bx = self.kv_x.breakpoints
        by = self.kv_y.breakpoints
        return np.array([bx[ix], by[iy]]), np.array([bx[ix + 1], by[iy + 1]])

    def element_basis_ids(self, e: int) -> np.ndarray:
        ix, iy = self.element_index(e)
        p = self.degree
        n1 = self.kv_x.n_basis
        ax = np.arange(p + 1)
        return ((ix + ax)[None, :] + n1 * (iy + ax)[:, None]).ravel()

    def basis_support(self, k: int) -> list[int]:
        """Elements in the support of basis function ``k`` (ascending order)."""
        n1 = self.kv_x.n_basis
        i, j = k % n1, k // n1
        p = self.degree
        nx, ny = self.shape
        xs = range(max(i - p, 0), min(i, nx - 1) + 1)
        ys = range(max(j - p, 0), min(j, ny - 1) + 1)
        return [ix + nx * iy for iy in ys for ix in xs]

    def locate(self, pts) -> np.ndarray:
        """Element ids of points (right/top boundary maps to the last span)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        (x0, y0), (x1, y1) = self.box
        tol = 1e-12 * max(x1 - x0, y1 - y0)
        if np.any(pts[:, 0] < x0 - tol) or np.any(pts[:, 0] > x1 + tol) \
                or np.any(pts[:, 1] < y0 - tol) or np.any(pts[:, 1] > y1 + tol):
            raise ValueError("point outside the basis domain")
        nx, ny = self.shape
        hx, hy = self.h
        ix = np.clip(np.floor((pts[:, 0] - x0) / hx).astype(int), 0, nx - 1)
        iy = np.clip(np.floor((pts[:, 1] - y0) / hy).astype(int), 0, ny - 1)
        return ix + nx * iy

    def _extraction_1d(self, direction: int, ispan: int) -> np.ndarray:
        key = ("C1", direction, ispan)
        C = self._cache.get(key)
        if C is None:
            kv = self.kv_x if direction == 0 else self.kv_y
            a, b = kv.breakpoints[ispan], kv.breakpoints[ispan + 1]
            p = kv.degree
            nodes = a + (b - a) * (gauss_lobatto_points(p) + 1.0) / 2.0
            C = eval_basis_and_derivs(kv, nodes, 0, span=_span_of_element(kv, ispan))[0].T
            C = np.ascontiguousarray(C)
            self._cache[key] = C
        return C

    def element_derivs_1d(self, direction: int, ispan: int, x, max_order: int) -> np.ndarray:
        """Derivatives of the ``p + 1`` univariate functions on a span.

        Evaluated through the Lagrange extraction of that span, hence valid as
        a polynomial extension outside it. Shape ``(max_order+1, npts, p+1)``.
        """
        kv = self.kv_x if direction == 0 else self.kv_y
        p = kv.degree
        a, b = kv.breakpoints[ispan], kv.breakpoints[ispan + 1]
        s = 2.0 * (np.asarray(x, dtype=float) - a) / (b - a) - 1.0
        lag = lagrange_derivs(gauss_lobatto_points(p), s, max_order)
        scale = (2.0 / (b - a)) ** np.arange(max_order + 1)
        lag *= scale[:, None, None]
        return lag @ self._extraction_1d(direction, ispan).T

    def element_derivs(self, e: int, pts, max_order: int) -> tuple[np.ndarray, np.ndarray]:
        """Univariate factors on element ``e`` at ``pts``: ``(X, Y)`` arrays."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        ix, iy = self.element_index(e)
        X = self.element_derivs_1d(0, ix, pts[:, 0], max_order)
        Y = self.element_derivs_1d(1, iy, pts[:, 1], max_order)
        return X, Y

    def element_values_and_gradients(self, e: int, pts) -> tuple[np.ndarray, np.ndarray]:
        """Values ``(npts, nloc)`` and gradients ``(npts, nloc, 2)`` on element ``e``."""
        X, Y = self.element_derivs(e, pts, 1)
        vals = tensor(X[0], Y[0])
        grads = np.stack([tensor(X[1], Y[0]), tensor(X[0], Y[1])], axis=-1)
        return vals, grads

    @cached_property
    def max_element_size(self) -> float:
        return max(self.h)


def tensor(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Tensor product of univariate factors, local index ``ax + (p+1) * ay``."""
    npts = X.shape[0]
    return np.einsum("pi,pj->pji", X, Y).reshape(npts, -1)


def tensor_eval(basis: TensorBSplineBasis, x, max_order: int = 1) -> TensorEval:
    """Nonzero tensor-product basis functions at a single point ``x``."""
    x = np.asarray(x, dtype=float)
    ix = find_span(basis.kv_x, x[0]) - basis.degree
    iy = find_span(basis.kv_y, x[1]) - basis.degree
    e = ix + basis.shape[0] * iy
    m = max(max_order, 1)
    Dx = eval_basis_and_derivs(basis.kv_x, x[0], m)
    Dy = eval_basis_and_derivs(basis.kv_y, x[1], m)
    vals = np.outer(Dy[0], Dx[0]).ravel()
    grads = np.stack([np.outer(Dy[0], Dx[1]).ravel(), np.outer(Dy[1], Dx[0]).ravel()], axis=-1)
    dx = np.array([np.outer(Dy[0], Dx[k]).ravel() for k in range(m + 1)])
    dy = np.array([np.outer(Dy[k], Dx[0]).ravel() for k in range(m + 1)])
    return TensorEval(basis.element_basis_ids(e), vals, grads, dx[: max_order + 1], dy[: max_order + 1])


def extraction_operator(basis: TensorBSplineBasis, element: int) -> ExtractionOperator:
    """Lagrange extraction operator of a background element.

    The elemental basis is the tensor-product Lagrange basis on Gauss-Lobatto
    nodes; ``C[k, j]`` is the value of the k-th supported B-spline at node j.
    """
    nx, ny = basis.shape
    if not 0 <= element < nx * ny:
        raise ValueError(f"element {element} is not a nonempty knot span")
    ix, iy = basis.element_index(element)
    Cx = basis._extraction_1d(0, ix)
    Cy = basis._extraction_1d(1, iy)
    C = np.kron(Cy, Cx)
    return ExtractionOperator(element, C, basis.element_basis_ids(element))
