"""
Local weak-form contributions.

Two physics are supported: plane-strain linear elasticity (two fields) and
linear heat conduction (one field). Both are written with the same operator
structure so every term below serves both:

* ``strain(G)`` maps basis gradients to the generalized strain
  (Voigt strain or temperature gradient),
* ``D`` is the constitutive matrix,
* ``normal_op(n)`` contracts a generalized stress with the normal, giving the
  traction ``sigma . n`` or the flux ``kappa grad(theta) . n``.

Local DOFs are ordered ``n_fields * a + d`` for local function ``a`` and
field component ``d``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .geometry import Material
from .quadrature import gauss_rule, segment_quadrature
from .splines import tensor

PHYSICS = ("elasticity", "heat")


@dataclass(frozen=True)
class ConstitutiveModel:
    """Plane-strain elasticity or heat conduction for one material."""

    physics: str
    E: float = 1.0
    nu: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.physics not in PHYSICS:
            raise ConfigurationError(f"unknown physics {self.physics!r}; expected one of {PHYSICS}")

    @classmethod
    def from_material(cls, physics: str, mat: Material) -> "ConstitutiveModel":
        return cls(physics, mat.E, mat.nu, mat.kappa)

    @property
    def n_fields(self) -> int:
        return 2 if self.physics == "elasticity" else 1

    @property
    def stiffness(self) -> float:
        """Scalar modulus used by penalties and interface weights (E or kappa)."""
        return self.E if self.physics == "elasticity" else self.kappa

    @property
    def D(self) -> np.ndarray:
        if self.physics == "heat":
            return self.kappa * np.eye(2)
        nu = self.nu
        Et = self.E / ((1.0 + nu) * (1.0 - 2.0 * nu))
        return Et * np.array([
            [1.0 - nu, nu, 0.0],
            [nu, 1.0 - nu, 0.0],
            [0.0, 0.0, (1.0 - 2.0 * nu) / 2.0],
        ])

    def values(self, N: np.ndarray) -> np.ndarray:
        """Shape matrix ``(npts, nf, nf*nloc)`` from scalar values ``(npts, nloc)``."""
        nf = self.n_fields
        if nf == 1:
            return N[:, None, :]
        out = np.zeros((N.shape[0], nf, nf * N.shape[1]))
        for d in range(nf):
            out[:, d, d::nf] = N
        return out

    def strain(self, G: np.ndarray) -> np.ndarray:
        """Generalized strain operator from gradients ``(npts, nloc, 2)``."""
        if self.physics == "heat":
            return np.transpose(G, (0, 2, 1))
        npts, nloc, _ = G.shape
        B = np.zeros((npts, 3, 2 * nloc))
        B[:, 0, 0::2] = G[:, :, 0]
        B[:, 1, 1::2] = G[:, :, 1]
        B[:, 2, 0::2] = G[:, :, 1]
        B[:, 2, 1::2] = G[:, :, 0]
        return B

    def normal_op(self, n: np.ndarray) -> np.ndarray:
        """Contraction of generalized stress with normals ``(npts, 2)``."""
        n = np.atleast_2d(n)
        if self.physics == "heat":
            return n[:, None, :]
        out = np.zeros((n.shape[0], 2, 3))
        out[:, 0, 0] = n[:, 0]
        out[:, 0, 2] = n[:, 1]
        out[:, 1, 1] = n[:, 1]
        out[:, 1, 2] = n[:, 0]
        return out

    def traction(self, G: np.ndarray, n: np.ndarray) -> np.ndarray:
        """Traction (or normal flux) operator ``(npts, nf, nf*nloc)``."""
        n = np.broadcast_to(np.atleast_2d(n), (G.shape[0], 2))
        return self.normal_op(n) @ (self.D @ self.strain(G))


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty multipliers: Nitsche ``gamma_n``, ghost ``gamma_g``.

    The interface penalty uses ``gamma_n * gamma_itf_scale`` as its
    multiplier, so both conditions share ``gamma_n`` by default.
    """

    gamma_n: float = 100.0
    gamma_g: float = 1e-3
    gamma_itf_scale: float = 1.0

    def __post_init__(self):
        if not self.gamma_n > 0:
            raise ConfigurationError("gamma_n must be positive")
        if not self.gamma_g >= 0:
            raise ConfigurationError("gamma_g must be non-negative")
        if not self.gamma_itf_scale > 0:
            raise ConfigurationError("gamma_itf_scale must be positive")


@dataclass
class ElementContribution:
    """Local matrix and vector entries addressed by global DOFs."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    frows: np.ndarray
    fvals: np.ndarray

    @classmethod
    def empty(cls) -> "ElementContribution":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, np.zeros(0), z, np.zeros(0))

    @classmethod
    def from_dense(cls, dofs_r, dofs_c, K=None, F=None) -> "ElementContribution":
        """Scatter a dense block; local rows/cols with DOF -1 are discarded."""
        dofs_r = np.asarray(dofs_r, dtype=np.int64)
        dofs_c = np.asarray(dofs_c, dtype=np.int64)
        mr, mc = dofs_r >= 0, dofs_c >= 0
        if K is not None:
            Ks = K[np.ix_(mr, mc)]
            R, C = np.meshgrid(dofs_r[mr], dofs_c[mc], indexing="ij")
            rows, cols, vals = R.ravel(), C.ravel(), Ks.ravel()
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        if F is not None:
            frows, fvals = dofs_r[mr], np.asarray(F)[mr]
        else:
            frows, fvals = np.zeros(0, dtype=np.int64), np.zeros(0)
        return cls(rows, cols, vals, frows, fvals)


def field_values(value, pts: np.ndarray, nf: int) -> np.ndarray:
    """Prescribed data evaluated as ``(npts, nf)``.

    ``value`` is a number, a length-``nf`` vector, or a callable returning
    ``(npts,)`` (scalar fields) or ``(npts, nf)`` arrays.
    """
    pts = np.atleast_2d(pts)
    n = len(pts)
    if callable(value):
        v = np.asarray(value(pts), dtype=float)
        if v.ndim == 1 and nf == 1:
            v = v[:, None]
        if v.shape != (n, nf):
            raise ValueError(f"expected data of shape ({n}, {nf}), got {v.shape}")
        return v
    v = np.asarray(value, dtype=float)
    if v.ndim == 0:
        return np.full((n, nf), float(v))
    if v.shape == (nf,):
        return np.tile(v, (n, 1))
    raise ValueError(f"cannot use data of shape {v.shape} for {nf} field(s)")


# ---------------------------------------------------------------------------
# bulk

def bulk_matrix(model: ConstitutiveModel, G: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``sum_q w_q B^T D B`` for gradients ``G`` at the quadrature points."""
    B = model.strain(G)
    DB = model.D @ B
    return np.einsum("q,qsi,qsj->ij", w, B, DB)


def bulk_load(model: ConstitutiveModel, N: np.ndarray, w: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``sum_q w_q N^T f`` with ``f`` of shape ``(npts, nf)``."""
    V = model.values(N)
    return np.einsum("q,qdi,qd->i", w, V, f)


def bulk_forms(basis, cut, component: int, dofs: np.ndarray, model: ConstitutiveModel,
               load=None, order: int | None = None) -> ElementContribution:
    """Bulk stiffness and body load of one element component."""
    if cut.comp_material[component] == 0:
        return ElementContribution.empty()
    order = basis.degree if order is None else order
    pts, w = cut.quadrature(component, order)
    if len(w) == 0:
        return ElementContribution.empty()
    N, G = basis.element_values_and_gradients(cut.element, pts)
    K = bulk_matrix(model, G, w)
    F = None
    if load is not None:
        F = bulk_load(model, N, w, field_values(load, pts, model.n_fields))
    return ElementContribution.from_dense(dofs, dofs, K, F)


# ---------------------------------------------------------------------------
# boundary terms

def neumann_forms(basis, segment, dofs: np.ndarray, model: ConstitutiveModel, traction,
                  n_points: int | None = None) -> ElementContribution:
    """Load ``int delta_u . t_N`` over a boundary segment."""
    n_points = basis.degree + 1 if n_points is None else n_points
    if segment.length <= 0.0:
        return ElementContribution.empty()
    pts, w = segment_quadrature(segment.p0, segment.p1, n_points)
    N, _ = basis.element_values_and_gradients(segment.element, pts)
    F = bulk_load(model, N, w, field_values(traction, pts, model.n_fields))
    return ElementContribution.from_dense(dofs, dofs, None, F)


def nitsche_dirichlet_matrices(model: ConstitutiveModel, N, G, normal, w, gamma: float,
                               u_d: np.ndarray, mask=None) -> tuple[np.ndarray, np.ndarray]:
    """Non-symmetric Nitsche block for ``u = u_D``.

    ``-int du.(sigma n) + int (sigma(du) n).(u - u_D) + gamma int du.(u - u_D)``
    with ``gamma`` already scaled (modulus / h). ``mask`` selects constrained
    field components.
    """
    V = model.values(N)
    T = model.traction(G, normal)
    P = np.ones(model.n_fields) if mask is None else np.asarray(mask, dtype=float)
    PV = P[None, :, None] * V
    PT = P[None, :, None] * T
    K = (-np.einsum("q,qdi,qdj->ij", w, PV, T)
         + np.einsum("q,qdi,qdj->ij", w, PT, V)
         + gamma * np.einsum("q,qdi,qdj->ij", w, PV, V))
    F = (np.einsum("q,qdi,qd->i", w, PT, u_d)
         + gamma * np.einsum("q,qdi,qd->i", w, PV, u_d))
    return K, F


def nitsche_dirichlet_forms(basis, segment, dofs: np.ndarray, model: ConstitutiveModel, value,
                            gamma_n: float, h: float, mask=None,
                            n_points: int | None = None) -> ElementContribution:
    """Weak Dirichlet condition on one boundary segment (outward normal)."""
    if segment.length <= 0.0:
        return ElementContribution.empty()
    n_points = basis.degree + 1 if n_points is None else n_points
    pts, w = segment_quadrature(segment.p0, segment.p1, n_points)
    N, G = basis.element_values_and_gradients(segment.element, pts)
    u_d = field_values(value, pts, model.n_fields)
    gamma = gamma_n * model.stiffness / h
    K, F = nitsche_dirichlet_matrices(model, N, G, segment.normal, w, gamma, u_d, mask)
    return ElementContribution.from_dense(dofs, dofs, K, F)


# ---------------------------------------------------------------------------
# interfaces

def interface_weights(meas_i: float, meas_j: float, s_i: float, s_j: float) -> tuple[float, float]:
    """Averaging weights from sub-domain measures and moduli."""
    a, b = meas_i / s_i, meas_j / s_j
    if not a + b > 0:
        raise ValueError("interface weights need a positive measure on one side")
    return a / (a + b), b / (a + b)


def interface_penalty(meas_gamma: float, meas_i: float, meas_j: float, s_i: float, s_j: float,
                      gamma_n: float = 1.0) -> float:
    """Interface penalty ``2 gamma_n meas(Gamma) / (meas_I / S^I + meas_J / S^J)``.

    Scales like ``S / h``; with one side filling the element it reduces to
    ``2 gamma_n S / h``, the boundary penalty up to the factor 2.
    """
    return 2.0 * gamma_n * meas_gamma / (meas_i / s_i + meas_j / s_j)


def interface_matrix(model_i: ConstitutiveModel, model_j: ConstitutiveModel, N, G, normal, w,
                     w_i: float, w_j: float, gamma: float) -> np.ndarray:
    """Non-symmetric Nitsche coupling block on ``[dofs_I, dofs_J]``.

    ``-int [[du]].{sigma n} + int {sigma(du) n}.[[u]] + gamma int [[du]].[[u]]``
    with ``[[u]] = u^I - u^J`` and the normal pointing from I to J. ``N`` and
    ``G`` are tuples with the values and gradients of both sides.
    """
    Vi, Vj = model_i.values(N[0]), model_j.values(N[1])
    Ti, Tj = model_i.traction(G[0], normal), model_j.traction(G[1], normal)
    jump = np.concatenate([Vi, -Vj], axis=2)
    avg = np.concatenate([w_i * Ti, w_j * Tj], axis=2)
    return (-np.einsum("q,qdi,qdj->ij", w, jump, avg)
            + np.einsum("q,qdi,qdj->ij", w, avg, jump)
            + gamma * np.einsum("q,qdi,qdj->ij", w, jump, jump))


def interface_forms(basis, segment, dofs_i: np.ndarray, dofs_j: np.ndarray,
                    model_i: ConstitutiveModel, model_j: ConstitutiveModel,
                    measures: tuple[float, float, float], gamma_n: float = 1.0,
                    n_points: int | None = None) -> ElementContribution:
    """Interface coupling over one segment.

    ``measures`` are ``(meas(Omega^I), meas(Omega^J), meas(Gamma^IJ))`` within
    the parent element.
    """
    if segment.is_boundary:
        raise ValueError("segment borders void; use a boundary condition instead")
    if segment.length <= 0.0:
        return ElementContribution.empty()
    n_points = basis.degree + 1 if n_points is None else n_points
    pts, w = segment_quadrature(segment.p0, segment.p1, n_points)
    N, G = basis.element_values_and_gradients(segment.element, pts)
    m_i, m_j, m_g = measures
    s_i, s_j = model_i.stiffness, model_j.stiffness
    w_i, w_j = interface_weights(m_i, m_j, s_i, s_j)
    gamma = interface_penalty(m_g, m_i, m_j, s_i, s_j, gamma_n)
    K = interface_matrix(model_i, model_j, (N, N), (G, G), segment.normal, w, w_i, w_j, gamma)
    dofs = np.concatenate([dofs_i, dofs_j])
    return ElementContribution.from_dense(dofs, dofs, K)


# ---------------------------------------------------------------------------
# ghost penalty

def normal_derivatives(basis, element: int, pts: np.ndarray, axis: int, max_order: int) -> np.ndarray:
    """``d^k/dn^k`` of the element polynomials for ``k = 0..max_order``.

    Uses the polynomial of ``element`` even when ``pts`` lie on its boundary,
    which is what the face-based ghost penalty needs. Shape
    ``(max_order+1, npts, nloc)``.
    """
    X, Y = basis.element_derivs(element, pts, max_order)
    if axis == 0:
        return np.stack([tensor(X[k], Y[0]) for k in range(max_order + 1)])
    return np.stack([tensor(X[0], Y[k]) for k in range(max_order + 1)])


def ghost_matrix(model: ConstitutiveModel, Dp: np.ndarray, Dm: np.ndarray, w: np.ndarray,
                 gamma_g: float, h: float) -> np.ndarray:
    """Sum over ``k = 1..p`` of ``gamma_g S h^(2k-1) int [[d_n^k du]].[[d_n^k u]]``.

    ``Dp``/``Dm`` are normal derivatives of the plus/minus side functions from
    :func:`normal_derivatives`.
    """
    p = Dp.shape[0] - 1
    S = model.stiffness
    nloc_p, nloc_m = Dp.shape[2], Dm.shape[2]
    nf = model.n_fields
    K = np.zeros((nf * (nloc_p + nloc_m),) * 2)
    for k in range(1, p + 1):
        jump = np.concatenate([model.values(Dp[k]), -model.values(Dm[k])], axis=2)
        K += gamma_g * S * h ** (2 * k - 1) * np.einsum("q,qdi,qdj->ij", w, jump, jump)
    return K


def ghost_forms(basis, facet, intervals, dofs_plus: np.ndarray, dofs_minus: np.ndarray,
                model: ConstitutiveModel, gamma_g: float, h: float,
                n_points: int | None = None) -> ElementContribution:
    """Ghost penalty for one matched pair over its facet overlap ``intervals``."""
    if gamma_g == 0.0 or not intervals:
        return ElementContribution.empty()
    p = basis.degree
    n_points = p + 1 if n_points is None else n_points
    x, wr = gauss_rule(n_points)
    s = np.concatenate([a + (b - a) * x for a, b in intervals])
    w = np.concatenate([(b - a) * wr for a, b in intervals])
    pts = facet.point(s)
    Dp = normal_derivatives(basis, facet.plus, pts, facet.axis, p)
    Dm = normal_derivatives(basis, facet.minus, pts, facet.axis, p)
    K = ghost_matrix(model, Dp, Dm, w, gamma_g, h)
    dofs = np.concatenate([dofs_plus, dofs_minus])
    return ElementContribution.from_dense(dofs, dofs, K)
