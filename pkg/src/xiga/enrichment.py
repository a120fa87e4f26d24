"""
Generalized Heaviside enrichment.

Every background basis function ``B_k`` is replicated once per connected
single-material subregion of its support. A subregion is a set of
``(element, component)`` pairs; membership of a quadrature point is decided by
the integration cell it belongs to, so the indicator functions never need a
point-in-region test.
"""
from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cutmesh import AREA_FLOOR, CutMesh, _UnionFind
from .errors import ConfigurationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BasisEnrichment:
    """Connected material subregions in the support of one basis function."""

    k: int
    subregions: tuple[tuple[tuple[int, int], ...], ...]
    materials: tuple[int, ...]
    areas: tuple[float, ...]

    @property
    def L(self) -> int:
        return len(self.subregions)

    def level_of(self, element: int, component: int) -> int | None:
        for ell, region in enumerate(self.subregions):
            if (element, component) in region:
                return ell
        return None

    def indicator(self, ell: int, element: int, component: int) -> int:
        """1 if the element component lies in subregion ``ell``, else 0."""
        if not 0 <= ell < self.L:
            raise IndexError(f"basis {self.k} has {self.L} levels, got {ell}")
        return int((element, component) in self.subregions[ell])


def enumerate_subregions(mesh: CutMesh) -> list[BasisEnrichment]:
    """Enrichment levels of every background basis function.

    Void components never form a level. Subregions are ordered by their
    smallest ``(element, component)`` pair.
    """
    basis = mesh.basis
    # uniform non-void elements of one material need no graph search
    uniform_mat = np.array(
        [el.comp_material[0] if el.is_uniform else -1 for el in mesh.elements])
    out = []
    for k in range(basis.n_basis):
        support = basis.basis_support(k)
        mats = uniform_mat[support]
        if mats[0] > 0 and np.all(mats == mats[0]):
            region = tuple((e, 0) for e in support)
            area = sum(mesh[e].comp_area[0] for e in support)
            out.append(BasisEnrichment(k, (region,), (int(mats[0]),), (float(area),)))
            continue
        nodes = [(e, c) for e in support for c in range(mesh[e].n_components)
                 if mesh[e].comp_material[c] > 0]
        if not nodes:
            out.append(BasisEnrichment(k, (), (), ()))
            continue
        index = {n: i for i, n in enumerate(nodes)}
        uf = _UnionFind(len(nodes))
        for e, i, e2, j in mesh.component_links(support):
            a, b = index.get((e, i)), index.get((e2, j))
            if a is not None and b is not None:
                uf.union(a, b)
        labels = uf.labels()
        nlev = int(labels.max()) + 1
        regions = [[] for _ in range(nlev)]
        for n, lab in zip(nodes, labels):
            regions[lab].append(n)
        mats_ = tuple(int(mesh[r[0][0]].comp_material[r[0][1]]) for r in regions)
        areas = tuple(float(sum(mesh[e].comp_area[c] for e, c in r)) for r in regions)
        out.append(BasisEnrichment(k, tuple(tuple(r) for r in regions), mats_, areas))
    return out


@dataclass
class EnrichedDofMap:
    """Global numbering of enriched DOFs, ordered by basis, level, component.

    ``local[(e, c)]`` holds, for each of the ``(p+1)**2`` local functions of
    element ``e``, the scalar enriched index active on component ``c`` (or -1
    if that function was dropped). Vector DOFs are ``n_fields * s + d``.
    """

    enrichments: list[BasisEnrichment]
    n_fields: int
    scalar_index: dict[tuple[int, int], int]
    local: dict[tuple[int, int], np.ndarray]
    dropped: list[tuple[int, int]] = field(default_factory=list)

    @property
    def n_scalar(self) -> int:
        return len(self.scalar_index)

    @property
    def n_dofs(self) -> int:
        return self.n_fields * self.n_scalar

    def dof(self, k: int, ell: int, d: int = 0) -> int:
        return self.n_fields * self.scalar_index[(k, ell)] + d

    def scalar_dofs(self, element: int, component: int) -> np.ndarray:
        return self.local[(element, component)]

    def element_dofs(self, element: int, component: int) -> np.ndarray:
        """Vector DOFs in local order ``(a, d)``; -1 marks dropped functions."""
        s = self.local[(element, component)]
        nf = self.n_fields
        if nf == 1:
            return s
        dofs = nf * s[:, None] + np.arange(nf)[None, :]
        dofs[s < 0] = -1
        return dofs.ravel()

    def histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(en.L for en in self.enrichments).items()))

    def write_histogram(self, path: str | Path):
        """Write the ``(L_k, count)`` histogram as CSV."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["L_k", "count"])
            for L, n in self.histogram().items():
                w.writerow([L, n])


def build_dof_map(mesh: CutMesh, enrichments: list[BasisEnrichment] | None = None,
                  n_fields: int = 1) -> EnrichedDofMap:
    """Number enriched DOFs and map element components to them.

    Subregions with area below ``1e-12 h^2`` get no DOF and are recorded in
    ``dropped``.
    """
    if n_fields < 1:
        raise ConfigurationError("n_fields must be >= 1")
    if enrichments is None:
        enrichments = enumerate_subregions(mesh)
    basis = mesh.basis
    floor = AREA_FLOOR * mesh.h ** 2
    scalar_index = {}
    dropped = []
    level_lookup: dict[tuple[int, int, int], int] = {}
    for en in enrichments:
        for ell, region in enumerate(en.subregions):
            if en.areas[ell] < floor:
                dropped.append((en.k, ell))
                continue
            s = len(scalar_index)
            scalar_index[(en.k, ell)] = s
            for e, c in region:
                level_lookup[(en.k, e, c)] = s
    if not scalar_index:
        raise ConfigurationError("the discretisation has no degrees of freedom")
    if dropped:
        log.info("dropped %d enriched basis functions with vanishing support", len(dropped))
    local = {}
    for el in mesh.elements:
        ids = basis.element_basis_ids(el.element)
        for c in range(el.n_components):
            if el.comp_material[c] == 0:
                continue
            local[(el.element, c)] = np.array(
                [level_lookup.get((int(k), el.element, c), -1) for k in ids], dtype=np.int64)
    return EnrichedDofMap(enrichments, n_fields, scalar_index, local, dropped)
