"""
Discrete immersed problems: geometry, materials, loads and boundary
conditions in, assembled system and solution field out.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .cutmesh import CutMesh, SIDES
from .enrichment import EnrichedDofMap, build_dof_map, enumerate_subregions
from .errors import ConfigurationError
from .geometry import MaterialTable, PhaseMap
from .quadrature import quads_quadrature
from .splines import TensorBSplineBasis
from .system import SolveReport, SparseSystem, assemble, condition_number, solve
from .weakform import (
    ConstitutiveModel,
    ElementContribution,
    PenaltyConfig,
    bulk_forms,
    bulk_load,
    bulk_matrix,
    field_values,
    ghost_forms,
    interface_forms,
    neumann_forms,
    nitsche_dirichlet_forms,
)

log = logging.getLogger(__name__)

TERMS = ("bulk", "boundary", "interface", "ghost")


@dataclass(frozen=True)
class BoundaryCondition:
    """Condition on a boundary surface.

    ``surface`` is a level-set index (the material/void boundary produced by
    that level set) or a side of the background box. ``value`` is a number,
    vector or callable of points. ``components`` restricts a Dirichlet
    condition to some field components.
    """

    surface: int | str
    kind: str
    value: Any = 0.0
    components: tuple[bool, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise ConfigurationError(f"unknown boundary condition kind {self.kind!r}")
        if isinstance(self.surface, str) and self.surface not in SIDES:
            raise ConfigurationError(f"unknown box side {self.surface!r}; expected one of {SIDES}")


@dataclass
class Problem:
    """An immersed heat or elasticity problem on a tensor B-spline background."""

    basis: TensorBSplineBasis
    levelsets: Sequence[Callable]
    phase_map: PhaseMap
    materials: MaterialTable
    physics: str = "heat"
    body_load: Any = None
    boundary: list[BoundaryCondition] = field(default_factory=list)
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    level: int = 0

    def __post_init__(self):
        self.phase_map.validate(self.materials)
        self.models = {
            M: ConstitutiveModel.from_material(self.physics, mat)
            for M, mat in self.materials.materials.items()
        }
        self._mesh = None
        self._dofmap = None

    @property
    def n_fields(self) -> int:
        return 2 if self.physics == "elasticity" else 1

    @property
    def mesh(self) -> CutMesh:
        if self._mesh is None:
            self._mesh = CutMesh(self.basis, self.levelsets, self.phase_map, self.level)
        return self._mesh

    @property
    def dofmap(self) -> EnrichedDofMap:
        if self._dofmap is None:
            self._dofmap = build_dof_map(self.mesh, enumerate_subregions(self.mesh), self.n_fields)
        return self._dofmap

    def load_for(self, material: int):
        if isinstance(self.body_load, dict):
            return self.body_load.get(material)
        return self.body_load

    # -- assembly ------------------------------------------------------------
    def _span_class(self, e: int) -> tuple[int, int]:
        p = self.basis.degree
        nx, ny = self.basis.shape
        ix, iy = self.basis.element_index(e)
        cx = ix if ix < p else (ix - nx if ix >= nx - p else p)
        cy = iy if iy < p else (iy - ny if iy >= ny - p else p)
        return cx, cy

    def _uniform_bulk(self, elements: list[int]) -> list[ElementContribution]:
        """Batched bulk terms of uncut single-material elements."""
        groups = defaultdict(list)
        for e in elements:
            groups[(self._span_class(e), int(self.mesh[e].comp_material[0]))].append(e)
        out = []
        p = self.basis.degree
        nf = self.n_fields
        dm = self.dofmap
        for (_, M), els in sorted(groups.items()):
            model = self.models[M]
            lo0, hi0 = self.basis.element_bounds(els[0])
            pts0, w = quads_quadrature(lo0, hi0, p)
            N, G = self.basis.element_values_and_gradients(els[0], pts0)
            K = bulk_matrix(model, G, w)
            dofs = np.stack([dm.element_dofs(e, 0) for e in els])
            if np.any(dofs < 0):
                # rare: fall back to the general path
                for e in els:
                    out.append(bulk_forms(self.basis, self.mesh[e], 0, dm.element_dofs(e, 0),
                                          model, self.load_for(M)))
                continue
            nd = dofs.shape[1]
            rows = np.repeat(dofs, nd, axis=1).ravel()
            cols = np.tile(dofs, (1, nd)).ravel()
            vals = np.tile(K.ravel(), len(els))
            load = self.load_for(M)
            if load is not None:
                los = np.array([self.basis.element_bounds(e)[0] for e in els])
                pts = (pts0 - lo0)[None, :, :] + los[:, None, :]
                f = field_values(load, pts.reshape(-1, 2), nf).reshape(len(els), len(w), nf)
                F = np.einsum("q,qdi,eqd->ei", w, model.values(N), f)
                frows, fvals = dofs.ravel(), F.ravel()
            else:
                frows, fvals = np.zeros(0, dtype=np.int64), np.zeros(0)
            out.append(ElementContribution(rows, cols, vals, frows, fvals))
        return out

    def contributions(self, terms=TERMS) -> list[ElementContribution]:
        mesh, dm, basis = self.mesh, self.dofmap, self.basis
        h = mesh.h
        bcs = {}
        for bc in self.boundary:
            if bc.surface in bcs:
                raise ConfigurationError(f"surface {bc.surface!r} has two boundary conditions")
            bcs[bc.surface] = bc
        out = []
        uniform = [el.element for el in mesh.elements if el.is_uniform and el.comp_material[0] > 0]
        if "bulk" in terms:
            out.extend(self._uniform_bulk(uniform))
        for el in mesh.elements:
            if el.material_area == 0.0:
                continue
            e = el.element
            if "bulk" in terms and not (el.is_uniform and el.comp_material[0] > 0):
                for c in range(el.n_components):
                    M = int(el.comp_material[c])
                    if M == 0:
                        continue
                    out.append(bulk_forms(basis, el, c, dm.element_dofs(e, c), self.models[M],
                                          self.load_for(M)))
            for seg in el.segments:
                if seg.is_boundary:
                    if "boundary" not in terms:
                        continue
                    bc = bcs.get(seg.surface)
                    if bc is None:
                        continue
                    M, c = seg.materials[0], seg.components[0]
                    dofs = dm.element_dofs(e, c)
                    if bc.kind == "dirichlet":
                        out.append(nitsche_dirichlet_forms(
                            basis, seg, dofs, self.models[M], bc.value,
                            self.penalty.gamma_n, h, bc.components))
                    else:
                        out.append(neumann_forms(basis, seg, dofs, self.models[M], bc.value))
                elif "interface" in terms:
                    I, J = seg.materials
                    cI, cJ = seg.components
                    meas_g = sum(s.length for s in el.segments if s.materials == (I, J))
                    out.append(interface_forms(
                        basis, seg, dm.element_dofs(e, cI), dm.element_dofs(e, cJ),
                        self.models[I], self.models[J],
                        (el.material_measure(I), el.material_measure(J), meas_g),
                        self.penalty.gamma_n * self.penalty.gamma_itf_scale))
        if "ghost" in terms and self.penalty.gamma_g > 0:
            for gf in mesh.ghost_facets():
                f = gf.facet
                for i, j, M, intervals in gf.pairs:
                    out.append(ghost_forms(basis, f, intervals, dm.element_dofs(f.plus, i),
                                           dm.element_dofs(f.minus, j), self.models[M],
                                           self.penalty.gamma_g, h))
        return out

    def assemble(self, terms=TERMS) -> SparseSystem:
        unknown = set(terms) - set(TERMS)
        if unknown:
            raise ConfigurationError(f"unknown terms {sorted(unknown)}; expected {TERMS}")
        return assemble(self.contributions(terms), self.dofmap.n_dofs)

    def solve(self, with_condition: bool = False) -> "Solution":
        system = self.assemble()
        report = solve(system)
        if with_condition:
            report.condition = condition_number(system)
        log.info("solved %d dofs, residual %.2e", system.n, report.residual)
        return Solution(self, report.u, report, system)


@dataclass
class Solution:
    """Solved enriched field with evaluation and error integration."""

    problem: Problem
    u: np.ndarray
    report: SolveReport
    system: SparseSystem | None = None

    @property
    def mesh(self) -> CutMesh:
        return self.problem.mesh

    @property
    def dofmap(self) -> EnrichedDofMap:
        return self.problem.dofmap

    def local_coefficients(self, element: int, component: int) -> np.ndarray:
        dofs = self.dofmap.element_dofs(element, component)
        coef = np.where(dofs >= 0, self.u[np.maximum(dofs, 0)], 0.0)
        nf = self.problem.n_fields
        return coef.reshape(-1, nf)

    def evaluate(self, element: int, component: int, pts) -> tuple[np.ndarray, np.ndarray]:
        """Values ``(npts, nf)`` and gradients ``(npts, nf, 2)`` on one element component."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        N, G = self.problem.basis.element_values_and_gradients(element, pts)
        coef = self.local_coefficients(element, component)
        return N @ coef, np.einsum("pad,af->pfd", G, coef)

    def component_at(self, element: int, material: int, pts) -> np.ndarray:
        """Component of ``element`` with ``material`` containing each point."""
        el = self.mesh[element]
        cands = [c for c in range(el.n_components) if el.comp_material[c] == material]
        pts = np.atleast_2d(pts)
        if not cands:
            raise ValueError(f"element {element} holds no material {material}")
        if len(cands) == 1:
            return np.full(len(pts), cands[0])
        out = np.full(len(pts), cands[0])
        best = np.full(len(pts), np.inf)
        for t in range(len(el.tri)):
            c = el.tri_comp[t]
            if c not in cands:
                continue
            a, b, d = el.tri[t]
            # barycentric distance outside the triangle (0 when inside)
            T = np.column_stack([b - a, d - a])
            lam = np.linalg.solve(T, (pts - a).T).T
            l3 = np.column_stack([1 - lam.sum(1), lam])
            dist = np.maximum(-l3, 0).sum(1)
            better = dist < best
            out[better], best[better] = c, dist[better]
        for q in range(len(el.quad_lo)):
            c = el.quad_comp[q]
            if c not in cands:
                continue
            lo, hi = el.quad_lo[q], el.quad_hi[q]
            dist = (np.maximum(lo - pts, 0) + np.maximum(pts - hi, 0)).sum(1)
            better = dist < best
            out[better], best[better] = c, dist[better]
        return out

    def evaluate_points(self, pts, materials) -> tuple[np.ndarray, np.ndarray]:
        """Field at arbitrary points given the material each point belongs to."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        materials = np.broadcast_to(np.asarray(materials), (len(pts),))
        nf = self.problem.n_fields
        vals = np.zeros((len(pts), nf))
        grads = np.zeros((len(pts), nf, 2))
        elems = self.problem.basis.locate(pts)
        order = np.lexsort((materials, elems))
        keys = np.stack([elems[order], materials[order]], axis=1)
        start = np.flatnonzero(np.r_[True, np.any(keys[1:] != keys[:-1], axis=1)])
        bounds = np.r_[start, len(order)]
        for s0, s1 in zip(bounds[:-1], bounds[1:]):
            idx = order[s0:s1]
            e, M = int(elems[idx[0]]), int(materials[idx[0]])
            comps = self.component_at(e, M, pts[idx])
            for c in np.unique(comps):
                sel = idx[comps == c]
                v, g = self.evaluate(e, int(c), pts[sel])
                vals[sel], grads[sel] = v, g
        return vals, grads

    def quadrature_points(self, order: int):
        """Yield ``(element, component, material, pts, weights)`` over the material domain."""
        for el in self.mesh.elements:
            for c in range(el.n_components):
                M = int(el.comp_material[c])
                if M == 0:
                    continue
                pts, w = el.quadrature(c, order)
                if len(w):
                    yield el.element, c, M, pts, w

    def errors(self, reference, order: int | None = None) -> tuple[float, float]:
        """Relative L2 error and H1 semi-norm error against a reference.

        ``reference(pts, material)`` returns values ``(npts, nf)`` and
        gradients ``(npts, nf, 2)``. Integrals use order ``p + 2``.
        """
        order = self.problem.basis.degree + 2 if order is None else order
        num = np.zeros(2)
        den = np.zeros(2)
        for e, c, M, pts, w in self.quadrature_points(order):
            v, g = self.evaluate(e, c, pts)
            rv, rg = reference(pts, M)
            rv = np.asarray(rv, dtype=float).reshape(v.shape)
            rg = np.asarray(rg, dtype=float).reshape(g.shape)
            num[0] += w @ np.sum((v - rv) ** 2, axis=1)
            den[0] += w @ np.sum(rv ** 2, axis=1)
            num[1] += w @ np.sum((g - rg) ** 2, axis=(1, 2))
            den[1] += w @ np.sum(rg ** 2, axis=(1, 2))
        out = []
        for a, b in zip(num, den):
            if b > 0.0:
                out.append(float(np.sqrt(a / b)))
            elif a == 0.0:
                out.append(0.0)
            else:
                raise ZeroDivisionError("reference field has zero norm")
        return out[0], out[1]
