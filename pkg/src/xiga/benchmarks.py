"""
Benchmark problems and parameter studies.

Five studies are provided:

``sliver``
    Clamped bar whose tip cuts the last element at a distance ``delta``;
    sweeps sliver size, ghost penalty, degree and load case.
``rotated-bar``
    Bar under a quadratic axial body load, rotated in a fixed background
    grid; h-refinement for each in-plane angle.
``junction``
    Axis-aligned bar split into 2, 3 or 4 phases of identical elastic
    properties; h-refinement.
``inclusion``
    Heated circular inclusion in an unbounded host (closed-form solution
    imposed on the box); h-refinement for several integration grids.
``multimaterial``
    Square inclusion in a four-quadrant host under a sinusoidal heat load;
    compared against a fine-mesh solution of the same configuration.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .geometry import Circle, Material, MaterialTable, PhaseMap, Plane
from .problem import BoundaryCondition, Problem, Solution
from .splines import TensorBSplineBasis
from .system import DENSE_THRESHOLD, condition_number
from .verification import BarSolution, CylinderSolution, ErrorReport, convergence_rate
from .weakform import PenaltyConfig

log = logging.getLogger(__name__)

STUDIES = ("sliver", "rotated-bar", "junction", "inclusion", "multimaterial")

SLIVER_DELTAS = (0.001, 0.002, 0.0035, 0.005, 0.007, 0.01, 0.015, 0.025,
                 0.04, 0.06, 0.08, 0.1, 0.15, 0.25, 0.4, 0.6, 0.8, 0.9)
SLIVER_GAMMAS = (0.0, 1e-9, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)
SLIVER_LOADS = {"linear": "bar-linear", "quadratic": "bar-quadratic", "cubic": "bar-cubic"}
ANGLES = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0)
BAR_MESHES = (0.5, 0.25, 0.125, 0.0625)
JUNCTION_MESHES = (0.5, 0.25, 0.125, 0.0625, 0.03125)
JUNCTION_CONFIGS = ("two-phase", "three-phase", "four-phase", "four-phase-rotated")
INCLUSION_MESHES = (0.5, 0.25, 0.125, 0.0625, 0.03125)
INCLUSION_HINT = (3.125e-2, 7.8125e-3, 1.953125e-3)
MULTI_MESHES = (0.5, 0.25, 0.125, 0.0625, 0.03125)
MULTI_PRESETS = ("single-5", "single-13", "multi-5", "multi-13")
MULTI_REFERENCE_H = 0.015625

# bar placement: the bar's lower-left corner sits off the grid lines
BAR_ORIGIN = (0.123, 0.0789)
# inclusion centers are shifted so no grid node lies on an interface corner
INCLUSION_CENTER = (0.0123, 0.0078)
MULTI_CENTER = (1.01, 1.01)


@dataclass
class Case:
    """A benchmark problem with its reference field."""

    problem: Problem
    reference: Callable
    params: dict
    e_geo: float = float("nan")
    h_int: float = float("nan")


def _bar_reference(sol: BarSolution, origin, direction):
    d = np.asarray(direction, dtype=float)
    o = np.asarray(origin, dtype=float)

    def ref(pts, material):
        x0 = (pts - o) @ d
        u = sol.value(x0)
        du = sol.gradient(x0)
        vals = u[:, None] * d[None, :]
        grads = du[:, None, None] * np.outer(d, d)[None, :, :]
        return vals, grads

    return ref


def _axial_load(sol: BarSolution, area: float, origin, direction):
    d = np.asarray(direction, dtype=float)
    o = np.asarray(origin, dtype=float)

    def load(pts):
        x0 = (pts - o) @ d
        return (sol.load(x0) / area)[:, None] * d[None, :]

    return load


def sliver_case(p: int, delta: float, gamma_g: float = 1e-3, load: str = "linear",
                gamma_n: float = 100.0, E: float = 10.0) -> Case:
    """Bar ``[0, 3 + delta] x [0, 1]`` in the background ``[0, 4] x [0, 1]`` with ``h = 1``."""
    if load not in SLIVER_LOADS:
        raise ConfigurationError(f"unknown load case {load!r}; expected {sorted(SLIVER_LOADS)}")
    h = 1.0
    L = 3.0 + delta * h
    width = 1.0
    sol = BarSolution(SLIVER_LOADS[load], E=E, A=width, L=L, t=5.0, b0=2.0)
    basis = TensorBSplineBasis.uniform(p, ((0.0, 0.0), (4.0, 1.0)), (4, 1))
    tip = Plane((1.0, 0.0), (L, 0.0))
    traction = (sol.t / width, 0.0) if load == "linear" else (0.0, 0.0)
    body = None if load == "linear" else _axial_load(sol, width, (0.0, 0.0), (1.0, 0.0))
    problem = Problem(
        basis, [tip], PhaseMap(1, (1, 0)), MaterialTable({1: Material(E=E, nu=0.0)}),
        physics="elasticity", body_load=body,
        boundary=[BoundaryCondition("left", "dirichlet", 0.0), BoundaryCondition(0, "neumann", traction)],
        penalty=PenaltyConfig(gamma_n, gamma_g))
    ref = _bar_reference(sol, (0.0, 0.0), (1.0, 0.0))
    return Case(problem, ref, {"delta": delta, "load": load})


def _bar_planes(origin, angle_deg: float, L: float, width: float):
    """Four planes bounding a rotated rectangle; the bar is where all are negative."""
    t = np.deg2rad(angle_deg)
    d = np.array([np.cos(t), np.sin(t)])
    m = np.array([-np.sin(t), np.cos(t)])
    o = np.asarray(origin, dtype=float)
    return [
        Plane(tuple(-d), tuple(o)),              # x0 > 0 (clamped end)
        Plane(tuple(d), tuple(o + L * d)),       # x0 < L (free end)
        Plane(tuple(-m), tuple(o)),              # y0 > 0
        Plane(tuple(m), tuple(o + width * m)),   # y0 < width
    ], d, m


def rotated_bar_case(p: int, h: float, angle: float, gamma_g: float = 1e-3,
                     gamma_n: float = 100.0, E: float = 10.0) -> Case:
    """Bar ``L = 1``, ``l = 0.5`` rotated by ``angle`` degrees about its lower-left corner."""
    L, width = 1.0, 0.5
    box = ((-0.5, -0.25), (1.5, 1.25))
    t = np.deg2rad(angle)
    # center the bar in the box, then shift slightly off the grid
    center = np.array([0.5, 0.5]) + np.array(BAR_ORIGIN) * 0.1
    d = np.array([np.cos(t), np.sin(t)])
    m = np.array([-np.sin(t), np.cos(t)])
    origin = center - 0.5 * L * d - 0.5 * width * m
    planes, d, m = _bar_planes(origin, angle, L, width)
    n = _cells(box, h)
    basis = TensorBSplineBasis.uniform(p, box, n)
    sol = BarSolution("bar-quartic", E=E, A=width, L=L, b0=2.0)
    pm = PhaseMap(4, tuple(1 if P == 0 else 0 for P in range(16)))
    problem = Problem(
        basis, planes, pm, MaterialTable({1: Material(E=E, nu=0.0)}),
        physics="elasticity", body_load=_axial_load(sol, width, origin, d),
        boundary=[BoundaryCondition(0, "dirichlet", 0.0)],
        penalty=PenaltyConfig(gamma_n, gamma_g))
    return Case(problem, _bar_reference(sol, origin, d), {"angle": angle})


def _cells(box, h: float) -> tuple[int, int]:
    (x0, y0), (x1, y1) = box
    nx, ny = (x1 - x0) / h, (y1 - y0) / h
    if abs(nx - round(nx)) > 1e-9 or abs(ny - round(ny)) > 1e-9:
        raise ConfigurationError(f"mesh size {h} does not divide the box {box}")
    return int(round(nx)), int(round(ny))


def junction_case(p: int, h: float, config: str, single_material: bool = False,
                  gamma_g: float = 1e-3, gamma_n: float = 100.0, E: float = 10.0) -> Case:
    """Axis-aligned bar split into phases by extra level sets.

    Every phase gets its own material index (all with the same properties)
    unless ``single_material`` is set, in which case all phases share one.
    ``config="one-phase"`` adds no level set and serves as the baseline.
    """
    if config not in JUNCTION_CONFIGS + ("one-phase",):
        raise ConfigurationError(f"unknown junction configuration {config!r}; expected {JUNCTION_CONFIGS}")
    L, width = 1.0, 0.5
    box = ((0.0, 0.0), (1.5, 1.0))
    origin = np.array(BAR_ORIGIN)
    planes, d, m = _bar_planes(origin, 0.0, L, width)
    c = origin + np.array([0.5 * L, 0.5 * width])
    if config == "one-phase":
        extra = []
    elif config == "two-phase":
        extra = [Plane((1.0, 0.0), tuple(c))]
    elif config in ("three-phase", "four-phase"):
        extra = [Plane((1.0, 0.0), tuple(c)), Plane((0.0, 1.0), tuple(c))]
    else:
        extra = [Plane((1.0, 1.0), tuple(c)), Plane((1.0, -1.0), tuple(c))]
    nls = 4 + len(extra)
    table = []
    for P in range(2 ** nls):
        if P & 0b1111:
            table.append(0)
            continue
        bits = tuple((P >> (4 + j)) & 1 for j in range(len(extra)))
        if single_material or config == "one-phase":
            table.append(1)
        elif config == "two-phase":
            table.append(1 + bits[0])
        elif config == "three-phase":
            # left half is one phase; the right half is split by the horizontal line
            table.append(1 if bits[0] == 0 else 2 + bits[1])
        else:
            table.append(1 + bits[0] + 2 * bits[1])
    n_mat = max(max(table), 1)
    mats = MaterialTable({M: Material(E=E, nu=0.0) for M in range(1, n_mat + 1)})
    sol = BarSolution("bar-quartic", E=E, A=width, L=L, b0=2.0)
    basis = TensorBSplineBasis.uniform(p, box, _cells(box, h))
    problem = Problem(
        basis, planes + extra, PhaseMap(nls, tuple(table)), mats,
        physics="elasticity", body_load=_axial_load(sol, width, origin, d),
        boundary=[BoundaryCondition(0, "dirichlet", 0.0)],
        penalty=PenaltyConfig(gamma_n, gamma_g))
    return Case(problem, _bar_reference(sol, origin, d),
                {"config": config, "single_material": single_material})


def _level_for(h: float, h_int: float) -> int:
    r = np.log2(h / h_int)
    if r < -1e-9 or abs(r - round(r)) > 1e-6:
        raise ConfigurationError(f"integration size {h_int} is not h / 2**k for h = {h}")
    return int(round(r))


def inclusion_case(p: int, h: float, h_int: float, gamma_g: float = 1e-3,
                   gamma_n: float = 100.0) -> Case:
    """Circular inclusion ``a = 0.5`` in ``[-1, 1]^2`` with the exact solution on the box."""
    sol = CylinderSolution()
    center = np.array(INCLUSION_CENTER)
    box = ((-1.0, -1.0), (1.0, 1.0))
    basis = TensorBSplineBasis.uniform(p, box, _cells(box, h))
    circle = Circle(tuple(center), sol.a)
    mats = MaterialTable({1: Material(kappa=sol.kappa_i), 2: Material(kappa=sol.kappa_ii)})

    def exact(pts):
        r = np.hypot(*(pts - center).T)
        return sol.value(r)

    def ref(pts, material):
        dx = pts - center
        r = np.hypot(*dx.T)
        g = sol.radial_gradient(r) / np.maximum(r, 1e-300)
        return sol.value(r)[:, None], (g[:, None] * dx)[:, None, :]

    problem = Problem(
        basis, [circle], PhaseMap(1, (1, 2)), mats, physics="heat",
        body_load={1: sol.q, 2: 0.0},
        boundary=[BoundaryCondition(s, "dirichlet", exact) for s in ("bottom", "right", "top", "left")],
        penalty=PenaltyConfig(gamma_n, gamma_g), level=_level_for(h, h_int))
    e_geo = problem.mesh.geometric_error(1, np.pi * sol.a ** 2)
    return Case(problem, ref, {}, e_geo=e_geo, h_int=h_int)


def multimaterial_case(p: int, h: float, preset: str, gamma_g: float = 1e-3,
                       gamma_n: float = 50.0) -> Case:
    """Square inclusion in a four-quadrant host on ``[0, 2]^2``; reference is not attached.

    Level sets: the four inclusion sides, then the two lines through the
    inclusion center splitting the host into quadrants. ``preset`` is
    ``{single,multi}-{5,13}``: the conductivity scheme and whether each host
    quadrant is one material or three (the regions beyond the inclusion
    corner and beside each adjacent side).
    """
    if preset not in MULTI_PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}; expected {MULTI_PRESETS}")
    scheme, count = preset.split("-")
    a = 0.5
    c = np.array(MULTI_CENTER)
    lo, hi = c - a / 2, c + a / 2
    planes = [
        Plane((-1.0, 0.0), (lo[0], 0.0)),  # f0 = 1 left of the inclusion
        Plane((1.0, 0.0), (hi[0], 0.0)),   # f1 = 1 right of it
        Plane((0.0, -1.0), (0.0, lo[1])),  # f2 = 1 below
        Plane((0.0, 1.0), (0.0, hi[1])),   # f3 = 1 above
        Plane((1.0, 0.0), tuple(c)),       # f4 = 1 right half
        Plane((0.0, 1.0), tuple(c)),       # f5 = 1 top half
    ]

    def material(bits):
        outside_x = bits[0] or bits[1]
        outside_y = bits[2] or bits[3]
        if not (outside_x or outside_y):
            return 1
        quadrant = bits[4] + 2 * bits[5]          # 0..3
        if count == "5":
            return 2 + quadrant
        sub = 0 if (outside_x and outside_y) else (1 if outside_y else 2)
        return 2 + 3 * quadrant + sub

    pm = PhaseMap.from_function(6, material)
    n_mat = 5 if count == "5" else 13

    def host_kappa(M):
        quadrant = (M - 2) if count == "5" else (M - 2) // 3
        return 1.0 if scheme == "single" else 0.125 * (quadrant + 1)

    mats = {1: Material(kappa=1.0)}
    mats.update({M: Material(kappa=host_kappa(M)) for M in range(2, n_mat + 1)})
    box = ((0.0, 0.0), (2.0, 2.0))
    basis = TensorBSplineBasis.uniform(p, box, _cells(box, h))

    def q(pts):
        return np.sin(2 * np.pi * pts[:, 0]) * np.sin(2 * np.pi * pts[:, 1])

    problem = Problem(
        basis, planes, pm, MaterialTable(mats), physics="heat", body_load=q,
        boundary=[BoundaryCondition(s, "dirichlet", 0.0) for s in ("bottom", "right", "top", "left")],
        penalty=PenaltyConfig(gamma_n, gamma_g))
    return Case(problem, None, {"preset": preset})


def cache_dir() -> Path:
    return Path(os.environ.get("XIGA_CACHE", Path.home() / ".cache" / "xiga"))


def multimaterial_reference(p: int, preset: str, h_ref: float = MULTI_REFERENCE_H,
                            gamma_g: float = 1e-3, gamma_n: float = 50.0,
                            use_cache: bool = True) -> Solution:
    """Fine-mesh solution of a multi-material preset, cached on disk."""
    case = multimaterial_case(p, h_ref, preset, gamma_g, gamma_n)
    key = json.dumps({"p": p, "preset": preset, "h": h_ref, "gamma_g": gamma_g,
                      "gamma_n": gamma_n, "center": MULTI_CENTER, "version": 2}, sort_keys=True)
    path = cache_dir() / f"multimaterial-{hashlib.sha1(key.encode()).hexdigest()[:16]}.npz"
    problem = case.problem
    if use_cache and path.exists():
        data = np.load(path)
        if int(data["n"]) == problem.dofmap.n_dofs:
            from .system import SolveReport
            return Solution(problem, data["u"], SolveReport(data["u"], float(data["residual"])))
        log.warning("ignoring stale reference cache %s", path)
    sol = problem.solve()
    if use_cache:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, u=sol.u, n=problem.dofmap.n_dofs, residual=sol.report.residual, key=key)
    return sol


def solution_reference(ref: Solution, material_map: Callable[[int], int] | None = None) -> Callable:
    """Wrap a solution as ``reference(pts, material)``.

    ``material_map`` translates material ids of the solution under test into
    ids of ``ref`` when the two label their phases differently.
    """
    def reference(pts, material):
        M = material if material_map is None else material_map(material)
        return ref.evaluate_points(pts, M)
    return reference


def evaluate_case(case: Case, study: str, p: int, h: float, with_condition: bool = False,
                  reference=None) -> ErrorReport:
    problem = case.problem
    sol = problem.solve()
    cond = float("nan")
    if with_condition:
        if sol.system.n <= DENSE_THRESHOLD:
            cond = condition_number(sol.system)
        else:
            log.info("skipping condition number for %d dofs", sol.system.n)
    l2, h1 = sol.errors(reference or case.reference)
    return ErrorReport(
        study=study, p=p, h=h, h_int=case.h_int if case.h_int == case.h_int else h,
        gamma_n=problem.penalty.gamma_n, gamma_g=problem.penalty.gamma_g,
        dofs=problem.dofmap.n_dofs, l2=l2, h1=h1, e_geo=case.e_geo, cond=cond,
        residual=sol.report.residual, params=dict(case.params))


# ---------------------------------------------------------------------------
# studies

def _tuple(x, cast=float):
    if x is None:
        return None
    if isinstance(x, (list, tuple)):
        return tuple(cast(v) for v in x)
    return (cast(x),)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("XIGA_NUM_THREADS", "1")))
    except ValueError:
        raise ConfigurationError("XIGA_NUM_THREADS must be an integer") from None


_BUILDERS = {
    "sliver": sliver_case,
    "rotated-bar": rotated_bar_case,
    "junction": junction_case,
    "inclusion": inclusion_case,
    "multimaterial": multimaterial_case,
}


def _run_task(task) -> ErrorReport:
    study, h, kwargs, condition, ref_key = task
    case = _BUILDERS[study](**kwargs)
    reference = None
    if ref_key is not None:
        reference = solution_reference(multimaterial_reference(**ref_key))
    return evaluate_case(case, study, kwargs["p"], h, condition, reference)


def _execute(tasks: list) -> list[ErrorReport]:
    """Run tasks in order, across ``XIGA_NUM_THREADS`` worker processes if set."""
    n = _workers()
    if n == 1 or len(tasks) < 2:
        return [_run_task(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_run_task, tasks))


def sliver_study(p=(1, 2, 3), delta=SLIVER_DELTAS, gamma_g=SLIVER_GAMMAS, load=("linear",),
                 condition: bool = True, gamma_n: float = 100.0) -> list[ErrorReport]:
    tasks = [("sliver", 1.0, dict(p=p_, delta=dl, gamma_g=g, load=ld, gamma_n=gamma_n), condition, None)
             for ld in load for p_ in p for g in gamma_g for dl in delta]
    return _execute(tasks)


def rotated_bar_study(p=(1, 2, 3), h=BAR_MESHES, angle=ANGLES, gamma_g=(1e-3,),
                      condition: bool = False, gamma_n: float = 100.0) -> list[ErrorReport]:
    tasks = [("rotated-bar", h_, dict(p=p_, h=h_, angle=a, gamma_g=g, gamma_n=gamma_n), condition, None)
             for g in gamma_g for p_ in p for h_ in h for a in angle]
    return _execute(tasks)


def junction_study(p=(1, 2, 3), h=JUNCTION_MESHES, config=JUNCTION_CONFIGS, gamma_g=(1e-3,),
                   condition: bool = False, gamma_n: float = 100.0) -> list[ErrorReport]:
    tasks = [("junction", h_, dict(p=p_, h=h_, config=c, gamma_g=g, gamma_n=gamma_n), condition, None)
             for g in gamma_g for c in config for p_ in p for h_ in h]
    return _execute(tasks)


def inclusion_study(p=(1, 2, 3), h=INCLUSION_MESHES, h_int=INCLUSION_HINT, gamma_g=(1e-3,),
                    condition: bool = False, gamma_n: float = 100.0) -> list[ErrorReport]:
    tasks = [("inclusion", h_, dict(p=p_, h=h_, h_int=hi, gamma_g=g, gamma_n=gamma_n), condition, None)
             for g in gamma_g for hi in h_int for p_ in p for h_ in h]
    return _execute(tasks)


def multimaterial_study(p=(1, 2, 3), h=MULTI_MESHES, preset=MULTI_PRESETS, gamma_g=(1e-3,),
                        condition: bool = False, gamma_n: float = 50.0,
                        h_ref: float = MULTI_REFERENCE_H) -> list[ErrorReport]:
    tasks = []
    for g in gamma_g:
        for pr in preset:
            for p_ in p:
                ref_key = dict(p=p_, preset=pr, h_ref=h_ref, gamma_g=g, gamma_n=gamma_n)
                # solve and cache the reference once before fanning out
                multimaterial_reference(**ref_key)
                tasks += [("multimaterial", h_, dict(p=p_, h=h_, preset=pr, gamma_g=g, gamma_n=gamma_n),
                           condition, ref_key) for h_ in h]
    return _execute(tasks)


_RUNNERS = {
    "sliver": sliver_study,
    "rotated-bar": rotated_bar_study,
    "junction": junction_study,
    "inclusion": inclusion_study,
    "multimaterial": multimaterial_study,
}

# parameters each study reports its rates over (errors averaged over the rest)
RATE_GROUPS = {
    "sliver": None,
    "rotated-bar": ("gamma_g", "p"),
    "junction": ("gamma_g", "config", "p"),
    "inclusion": ("gamma_g", "h_int", "p"),
    "multimaterial": ("gamma_g", "preset", "p"),
}


def study_parameters(study: str) -> tuple[str, ...]:
    if study not in _RUNNERS:
        raise ConfigurationError(f"unknown study {study!r}; valid ids: {', '.join(STUDIES)}")
    import inspect

    return tuple(inspect.signature(_RUNNERS[study]).parameters)


def run_study(study: str, **overrides) -> list[ErrorReport]:
    """Run a study by id; keyword overrides replace the default parameter lists."""
    accepted = study_parameters(study)
    kwargs = {}
    casts = {"p": int, "config": str, "preset": str, "load": str, "angle": float}
    for key, val in overrides.items():
        if val is None:
            continue
        if key not in accepted:
            raise ConfigurationError(
                f"study {study!r} does not take {key!r}; parameters: {', '.join(accepted)}")
        if key in ("condition", "gamma_n", "h_ref"):
            kwargs[key] = val
        else:
            kwargs[key] = _tuple(val, casts.get(key, float))
    return _RUNNERS[study](**kwargs)


def rates(reports: list[ErrorReport], group_keys=("p",), metric: str = "l2",
          h_max: float | None = None) -> dict:
    """Fitted log-log slopes per group.

    Errors sharing a group and mesh size (e.g. over rotation angles) are
    averaged before fitting. ``h_max`` drops coarser meshes from the fit.
    """
    groups: dict = {}
    for r in reports:
        if h_max is not None and r.h > h_max * (1 + 1e-12):
            continue
        row = r.row()
        key = tuple(row[k] for k in group_keys)
        groups.setdefault(key, {}).setdefault(r.h, []).append(getattr(r, metric))
    out = {}
    for key, by_h in groups.items():
        hs = sorted(by_h)
        if len(hs) < 2:
            continue
        errs = [float(np.mean(by_h[x])) for x in hs]
        if min(errs) <= 0:
            continue
        out[key] = convergence_rate(hs, errs)
    return out


def rate_rows(study: str, reports: list[ErrorReport]) -> list[dict]:
    """Rates summary table (L2 and H1 slopes) for a study's reports."""
    keys = RATE_GROUPS.get(study)
    if not keys:
        return []
    l2 = rates(reports, keys, "l2")
    h1 = rates(reports, keys, "h1")
    return [dict(zip(keys, k), L2_rate=l2[k], H1_rate=h1.get(k, float("nan"))) for k in l2]
