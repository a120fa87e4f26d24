"""
End-to-end acceptance suite.

Each test checks one criterion at its stated tolerance and records a single
PASS/FAIL line, printed in the terminal summary. Study results are shared
between criteria through module-scoped fixtures. The multimaterial
references are cached on disk (``XIGA_CACHE``), so the first run is the
slowest.
"""
import math

import numpy as np
import pytest

from xiga.benchmarks import (
    JUNCTION_CONFIGS,
    INCLUSION_HINT,
    junction_case,
    rates,
    run_study,
    solution_reference,
)
from xiga.cutmesh import CutMesh
from xiga.enrichment import build_dof_map
from xiga.geometry import Circle, Material, MaterialTable, PhaseMap, Plane
from xiga.problem import BoundaryCondition, Problem
from xiga.splines import TensorBSplineBasis, eval_basis_and_derivs, find_span
from xiga.verification import convergence_rate

pytestmark = pytest.mark.slow

_REPORTS: dict[str, list] = {}


def _study(name, **kw):
    key = name + repr(sorted(kw.items()))
    if key not in _REPORTS:
        _REPORTS[key] = run_study(name, **kw)
    return _REPORTS[key]


def _fmt(d):
    return ", ".join(f"{k}={v:.2f}" if isinstance(v, float) else f"{k}={v}" for k, v in d.items())


# ------------------------------------------------------------------ 1

def test_criterion_1_linear_reproduction(record_criterion):
    reps = _study("sliver", p=(1, 2, 3), gamma_g=(1e-3,), load=("linear",), condition=False)
    assert len(reps) == 3 * 18
    l2 = max(r.l2 for r in reps)
    h1 = max(r.h1 for r in reps)
    ok = l2 <= 1e-9 and h1 <= 1e-8
    record_criterion(1, ok, f"max L2 {l2:.2e} (<= 1e-9), max H1 {h1:.2e} (<= 1e-8) over 54 runs")
    assert ok


# ------------------------------------------------------------------ 2

def test_criterion_2_polynomial_reproduction(record_criterion):
    quad = _study("sliver", p=(1, 2, 3), gamma_g=(1e-3,), load=("quadratic",), condition=False)
    cub = _study("sliver", p=(3,), gamma_g=(1e-3,), load=("cubic",), condition=False)
    q23 = max(r.l2 for r in quad if r.p >= 2)
    c3 = max(r.l2 for r in cub)
    q1 = min(r.l2 for r in quad if r.p == 1)
    ok = q23 <= 1e-8 and c3 <= 1e-8 and q1 >= 1e-3
    record_criterion(2, ok, f"constant load p=2,3 max L2 {q23:.2e}; linear load p=3 max L2 {c3:.2e}; "
                            f"constant load p=1 min L2 {q1:.2e} (>= 1e-3)")
    assert ok


# ------------------------------------------------------------------ 3

def test_criterion_3_ghost_conditioning(record_criterion):
    reps = _study("sliver", p=(2, 3), delta=(0.001,), gamma_g=(0.0, 1e-3), load=("linear",), condition=True)
    cond = {(r.p, r.gamma_g): r.cond for r in reps}
    ratios = {p: cond[(p, 0.0)] / cond[(p, 1e-3)] for p in (2, 3)}
    ok = all(v >= 10 for v in ratios.values())
    record_criterion(3, ok, "cond(0)/cond(1e-3) at delta=0.001h: "
                            + ", ".join(f"p={p}: {v:.2e}" for p, v in ratios.items()))
    assert ok


# ------------------------------------------------------------------ 4

def test_criterion_4_rotated_bar_rates(record_criterion):
    reps = _study("rotated-bar", condition=False)
    l2 = rates(reps, ("p",), "l2")
    h1 = rates(reps, ("p",), "h1")
    ok = True
    parts = []
    for p in (1, 2, 3):
        a, b = l2[(p,)], h1[(p,)]
        ok &= abs(a - (p + 1)) <= 0.3 and abs(b - p) <= 0.3
        parts.append(f"p={p}: L2 {a:.2f} (target {p + 1}), H1 {b:.2f} (target {p})")
    record_criterion(4, ok, "; ".join(parts) + " [tolerance 0.3]")
    assert ok


# ------------------------------------------------------------------ 5

def test_criterion_5_junction_robustness(record_criterion):
    reps = _study("junction", condition=False)
    groups = {}
    for r in reps:
        groups.setdefault((r.p, r.h), []).append(r.l2)
    spread = max(max(v) / min(v) for v in groups.values())
    worst = 0.0
    for p in (1, 2, 3):
        for h in (0.25, 0.125):
            base = junction_case(p, h, "one-phase").problem.solve()
            ref = solution_reference(base, lambda M: 1)
            for config in JUNCTION_CONFIGS:
                sol = junction_case(p, h, config, single_material=True).problem.solve()
                worst = max(worst, sol.errors(ref)[0])
    ok = spread < 10 and worst <= 1e-8
    record_criterion(5, ok, f"max L2 ratio across configurations {spread:.2f} (< 10); "
                            f"identical-material vs one-phase L2 {worst:.2e} (<= 1e-8)")
    assert ok


# ------------------------------------------------------------------ 6

def test_criterion_6_curved_interface(record_criterion):
    reps = _study("inclusion", p=(2,), condition=False)
    fine, coarse = min(INCLUSION_HINT), max(INCLUSION_HINT)
    slope = rates(reps, ("h_int",), "l2", h_max=0.125)
    s_fine, s_coarse = slope[(fine,)], slope[(coarse,)]
    geo = {}
    for r in reps:
        geo[r.h_int] = abs(r.e_geo)
    hs = sorted(geo)
    geo_rate = convergence_rate(hs, [geo[h] for h in hs])
    ok = s_fine >= 2.7 and s_coarse < 2.5 and geo_rate >= 1.8
    record_criterion(6, ok, f"p=2 L2 slope (3 finest meshes) h_int={fine:g}: {s_fine:.2f} (>= 2.7), "
                            f"h_int={coarse:g}: {s_coarse:.2f} (< 2.5); e_geo rate {geo_rate:.2f} (>= 1.8)")
    assert ok


# ------------------------------------------------------------------ 7

def test_criterion_7_multimaterial(record_criterion):
    # the coarsest mesh h = 0.5 is excluded from the fits (see README)
    runs = {("single-5", 1), ("single-5", 2), ("single-13", 1), ("single-13", 2),
            ("multi-13", 1), ("multi-13", 2), ("multi-13", 3), ("multi-5", 3)}
    reps = []
    for preset, p in sorted(runs):
        reps += _study("multimaterial", p=(p,), preset=(preset,), condition=False)
    s = rates(reps, ("preset", "p"), "l2", h_max=0.25)
    ok = True
    for preset in ("single-5", "single-13"):
        for p in (1, 2):
            ok &= abs(s[(preset, p)] - (p + 1)) <= 0.3
    for p in (1, 2):
        ok &= abs(s[("multi-13", p)] - (p + 1)) <= 0.4
    ok &= s[("multi-5", 3)] < s[("multi-13", 3)]
    record_criterion(7, ok, _fmt({f"{k[0]} p={k[1]}": v for k, v in sorted(s.items())}))
    assert ok


# ------------------------------------------------------------------ 8

def _greville_coefficients(kv, poly1d):
    p = kv.degree
    t = kv.knots
    g = np.array([t[i + 1:i + p + 1].mean() for i in range(kv.n_basis)])
    B = np.zeros((len(g), kv.n_basis))
    for i, x in enumerate(g):
        s = find_span(kv, x)
        B[i, s - p:s + 1] = eval_basis_and_derivs(kv, x, 0)[0]
    return np.linalg.solve(B, poly1d(g))


def _multi_problem(p, physics="heat"):
    b = TensorBSplineBasis.uniform(p, ((-1, -1), (1, 1)), (8, 8))
    ls = [Circle((0.05, -0.03), 0.55), Plane((1, 0.4), (0.13, 0))]
    mats = MaterialTable({1: Material(E=1.0, nu=0.3, kappa=1.0), 2: Material(E=5.0, nu=0.2, kappa=3.0),
                          3: Material(E=2.0, nu=0.1, kappa=0.5)})
    return Problem(b, ls, PhaseMap(2, (1, 2, 3, 0)), mats, physics=physics,
                   boundary=[BoundaryCondition("left", "dirichlet", 0.0)], level=1)


def test_criterion_8_property_suites(record_criterion):
    rng = np.random.default_rng(2024)
    notes = []

    # enriched partition of unity
    pu = 0.0
    for p in (1, 2, 3):
        prob = _multi_problem(p)
        mesh, dm, b = prob.mesh, prob.dofmap, prob.basis
        cells = [c for c in mesh.cells() if c.material > 0 and c.area > 0]
        for i in rng.integers(0, len(cells), 334 if p < 3 else 332):
            c = cells[i]
            v = np.asarray(c.vertices)
            x = (rng.dirichlet([1, 1, 1]) @ v) if c.kind == "tri" else v.min(0) + (v.max(0) - v.min(0)) * rng.uniform(0.01, 0.99, 2)
            N, _ = b.element_values_and_gradients(c.element, x[None])
            s = dm.scalar_dofs(c.element, c.component)
            pu = max(pu, abs(N[0][s >= 0].sum() - 1.0))
    notes.append(f"PU {pu:.1e}")

    # cut-cell tiling on random level sets
    tiling = 0.0
    b = TensorBSplineBasis.uniform(2, ((0, 0), (1, 1)), (5, 5))
    for _ in range(100):
        ls = []
        for _ in range(int(rng.integers(1, 4))):
            if rng.random() < 0.5:
                ls.append(Circle(tuple(rng.uniform(-0.2, 1.2, 2)), float(rng.uniform(0.1, 0.7))))
            else:
                ls.append(Plane(tuple(rng.normal(size=2)), tuple(rng.uniform(0, 1, 2))))
        n = len(ls)
        pm = PhaseMap(n, tuple(int(v) for v in rng.integers(0, 4, 2 ** n)))
        m = CutMesh(b, ls, pm, level=int(rng.integers(0, 3)))
        for el in m.elements:
            area = float(np.prod(el.hi - el.lo))
            tot = sum(c.area for c in el.cells()) + el.dropped_area
            tiling = max(tiling, abs(tot - area) / area)
    notes.append(f"tiling {tiling:.1e}")

    # ghost consistency and block definiteness
    ghost = 0.0
    spd = 0.0
    for p in (1, 2, 3):
        prob = _multi_problem(p)
        G = prob.assemble(("ghost",)).A
        b, dm = prob.basis, prob.dofmap
        cx = _greville_coefficients(b.kv_x, lambda x: 1 + x - 0.5 * x ** p)
        cy = _greville_coefficients(b.kv_y, lambda y: 2 - y ** p)
        coeff = np.outer(cy, cx).ravel()   # basis k = i + n1 * j
        u = np.zeros(dm.n_dofs)
        for (k, ell), s in dm.scalar_index.items():
            u[s] = coeff[k]
        ghost = max(ghost, abs(u @ (G @ u)) / (sp_norm(G) * (u @ u)))
        for physics in ("heat", "elasticity"):
            pr = _multi_problem(p, physics)
            for terms in (("bulk",), ("ghost",)):
                A = pr.assemble(terms).A.toarray()
                S = 0.5 * (A + A.T)
                lam = np.linalg.eigvalsh(S).min()
                spd = max(spd, -lam / np.linalg.norm(A, 2))
    notes.append(f"ghost consistency {ghost:.1e}")
    notes.append(f"min eig / norm {-spd:.1e}")

    residual = max((r.residual for reps in _REPORTS.values() for r in reps), default=0.0)
    notes.append(f"max residual {residual:.1e} over {sum(map(len, _REPORTS.values()))} runs")
    ok = pu <= 1e-12 and tiling <= 1e-12 and ghost <= 1e-12 and spd <= 1e-10 and residual <= 1e-8
    record_criterion(8, ok, "; ".join(notes))
    assert ok


def sp_norm(A):
    return math.sqrt((A.multiply(A)).sum())
