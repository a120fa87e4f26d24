import csv

import numpy as np
import pytest

from xiga.cutmesh import CutMesh
from xiga.enrichment import build_dof_map, enumerate_subregions
from xiga.errors import ConfigurationError
from xiga.geometry import Circle, PhaseMap, Plane
from xiga.splines import TensorBSplineBasis

BOX2 = ((0, 0), (2, 2))


def band_phases():
    # material 2 in 0.8 < y < 1.2, material 1 elsewhere
    return PhaseMap.from_function(2, lambda f: 2 if (f[0] and not f[1]) else 1)


def band_mesh(p=1, shape=(2, 2)):
    b = TensorBSplineBasis.uniform(p, BOX2, shape)
    return CutMesh(b, [Plane((0, 1), (0, 0.8)), Plane((0, 1), (0, 1.2))], band_phases())


def three_material_mesh():
    """Material 1 split by a band of 2, with material 3 to the right."""
    b = TensorBSplineBasis.uniform(1, BOX2, (2, 2))

    def mat(f):
        if f[2]:
            return 3
        return 2 if (f[0] and not f[1]) else 1

    ls = [Plane((0, 1), (0, 0.8)), Plane((0, 1), (0, 1.2)), Plane((1, 0), (1.2, 0))]
    return CutMesh(b, ls, PhaseMap.from_function(3, mat))


def random_cell_points(mesh, n, rng):
    cells = [c for c in mesh.cells() if c.material > 0 and c.area > 0]
    out = []
    for i in rng.integers(0, len(cells), n):
        c = cells[i]
        v = np.asarray(c.vertices)
        if c.kind == "quad":
            lo, hi = v.min(0), v.max(0)
            x = lo + (hi - lo) * rng.uniform(0.01, 0.99, 2)
        else:
            lam = rng.dirichlet([1, 1, 1]) * 0.98 + 0.02 / 3
            x = lam @ v
        out.append((c.element, c.component, x))
    return out


# --------------------------------------------------------------- levels

def test_single_material_support_has_one_level():
    b = TensorBSplineBasis.uniform(2, BOX2, (3, 3))
    m = CutMesh(b, [Plane((1, 0), (9, 0))], PhaseMap(1, (1, 2)))
    ens = enumerate_subregions(m)
    assert all(en.L == 1 for en in ens)
    assert ens[12].indicator(0, 4, 0) == 1


def test_disconnected_islands_give_two_levels():
    b = TensorBSplineBasis.uniform(1, BOX2, (2, 2))
    # two disks of material 1 in a void; the central support holds both
    pm = PhaseMap(2, (1, 1, 1, 0))
    m = CutMesh(b, [Circle((0.5, 0.5), 0.3), Circle((1.5, 1.5), 0.3)], pm)
    ens = enumerate_subregions(m)
    assert ens[4].L == 2
    assert ens[4].materials == (1, 1)
    assert ens[0].L == 1 and ens[8].L == 1
    # corners untouched by a disk see only void
    assert ens[2].L == 0 and ens[6].L == 0


def test_three_materials_one_split_gives_four_levels():
    m = three_material_mesh()
    en = enumerate_subregions(m)[4]
    assert en.L == 4
    assert sorted(en.materials) == [1, 1, 2, 3]
    total = sum(en.areas)
    assert total == pytest.approx(4.0, rel=1e-12)


def test_indicator_is_single_activation():
    m = three_material_mesh()
    en = enumerate_subregions(m)[4]
    for ell, region in enumerate(en.subregions):
        for e, c in region:
            vec = [en.indicator(l2, e, c) for l2 in range(en.L)]
            expect = [0] * en.L
            expect[ell] = 1
            assert vec == expect


def test_indicator_outside_support_is_zero():
    b = TensorBSplineBasis.uniform(1, ((0, 0), (3, 3)), (3, 3))
    m = CutMesh(b, [Plane((1, 0), (9, 0))], PhaseMap(1, (1, 2)))
    en = enumerate_subregions(m)[0]
    assert en.indicator(0, 8, 0) == 0
    with pytest.raises(IndexError):
        en.indicator(1, 0, 0)


def test_subregions_are_disjoint_and_single_material():
    m = three_material_mesh()
    for en in enumerate_subregions(m):
        seen = set()
        for ell, region in enumerate(en.subregions):
            assert not seen & set(region)
            seen |= set(region)
            mats = {int(m[e].comp_material[c]) for e, c in region}
            assert mats == {en.materials[ell]}
        support = set(m.basis.basis_support(en.k))
        expect = {(e, c) for e in support for c in range(m[e].n_components)
                  if m[e].comp_material[c] > 0}
        assert seen == expect


# ----------------------------------------------------------------- dof map

def test_dof_counts_uncut():
    b = TensorBSplineBasis.uniform(2, BOX2, (3, 3))
    m = CutMesh(b, [Plane((1, 0), (9, 0))], PhaseMap(1, (1, 2)))
    K = b.n_basis
    assert build_dof_map(m).n_dofs == K
    assert build_dof_map(m, n_fields=2).n_dofs == 2 * K


def test_dof_count_band():
    # rows of basis functions see 2, 3 and 2 subregions
    m = band_mesh()
    dm = build_dof_map(m)
    assert [en.L for en in dm.enrichments] == [2, 2, 2, 3, 3, 3, 2, 2, 2]
    assert dm.n_dofs == 9 + 3 * 1 + 3 * 2 + 3 * 1
    assert dm.histogram() == {2: 6, 3: 3}


def test_dof_count_is_sum_of_levels():
    m = three_material_mesh()
    dm = build_dof_map(m, n_fields=2)
    assert dm.n_scalar == sum(en.L for en in dm.enrichments) - len(dm.dropped)
    assert dm.n_dofs == 2 * dm.n_scalar


def test_numbering_is_ordered_and_dense():
    dm = build_dof_map(band_mesh(), n_fields=2)
    keys = sorted(dm.scalar_index, key=lambda kl: dm.scalar_index[kl])
    assert keys == sorted(keys)
    assert sorted(dm.scalar_index.values()) == list(range(dm.n_scalar))
    assert dm.dof(1, 1, 1) == 2 * dm.scalar_index[(1, 1)] + 1


def test_all_void_raises():
    b = TensorBSplineBasis.uniform(1, BOX2, (2, 2))
    m = CutMesh(b, [Plane((1, 0), (9, 0))], PhaseMap(1, (0, 1)))
    with pytest.raises(ConfigurationError):
        build_dof_map(m)


def test_histogram_csv(tmp_path):
    dm = build_dof_map(band_mesh())
    path = tmp_path / "levels.csv"
    dm.write_histogram(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows == [["L_k", "count"], ["2", "6"], ["3", "3"]]


# ------------------------------------------------------------- properties

@pytest.mark.parametrize("p", [1, 2, 3])
def test_enriched_partition_of_unity(p):
    b = TensorBSplineBasis.uniform(p, ((-1, -1), (1, 1)), (5, 5))
    ls = [Circle((0.1, 0.05), 0.55), Plane((1, 0.4), (0.2, 0))]
    pm = PhaseMap(2, (1, 2, 3, 0))
    m = CutMesh(b, ls, pm, level=1)
    dm = build_dof_map(m)
    rng = np.random.default_rng(p)
    coeff = np.ones(dm.n_scalar)
    for e, c, x in random_cell_points(m, 1000 // 3, rng):
        N, _ = b.element_values_and_gradients(e, x[None, :])
        s = dm.scalar_dofs(e, c)
        assert np.all(s >= 0)
        assert abs(N[0] @ coeff[s] - 1.0) <= 1e-12


@pytest.mark.parametrize("p", [1, 2, 3])
def test_local_linear_independence(p):
    m = band_mesh(p, (3, 3))
    dm = build_dof_map(m)
    rng = np.random.default_rng(7)
    n = (p + 1) ** 2
    for el in m.elements:
        for c in range(el.n_components):
            cells = [cl for cl in el.cells() if cl.component == c and cl.area > 0]
            pts = []
            while len(pts) < n:
                cl = cells[rng.integers(len(cells))]
                v = np.asarray(cl.vertices)
                if cl.kind == "quad":
                    lo, hi = v.min(0), v.max(0)
                    pts.append(lo + (hi - lo) * rng.uniform(0.05, 0.95, 2))
                else:
                    pts.append(rng.dirichlet([2, 2, 2]) @ v)
            N, _ = m.basis.element_values_and_gradients(el.element, np.array(pts))
            active = dm.scalar_dofs(el.element, c) >= 0
            assert np.linalg.matrix_rank(N[:, active]) == active.sum()
