"""
Reference solutions, error metrics and convergence rates.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .cutmesh import CutMesh

BAR_TAGS = ("bar-linear", "bar-quadratic", "bar-cubic", "bar-quartic")


@dataclass(frozen=True)
class BarSolution:
    """Axial displacement of a clamped bar with a free or loaded tip.

    ``bar-linear``: tip traction ``t``; ``bar-quadratic``: body load ``b0``;
    ``bar-cubic``: body load ``b0 x``; ``bar-quartic``: body load ``b0 x**2``.
    Loads are resultants per unit length, so ``A`` enters only through ``EA``.
    """

    tag: str
    E: float = 10.0
    A: float = 1.0
    L: float = 3.0
    t: float = 5.0
    b0: float = 2.0
    u_d: float = 0.0

    def __post_init__(self):
        if self.tag not in BAR_TAGS:
            raise ValueError(f"unknown bar solution {self.tag!r}; expected one of {BAR_TAGS}")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        EA, L, b0 = self.E * self.A, self.L, self.b0
        if self.tag == "bar-linear":
            u = self.t * x / EA
        elif self.tag == "bar-quadratic":
            u = b0 * (2 * L * x - x ** 2) / (2 * EA)
        elif self.tag == "bar-cubic":
            u = b0 * (3 * L ** 2 * x - x ** 3) / (6 * EA)
        else:
            u = b0 * (4 * L ** 3 * x - x ** 4) / (12 * EA)
        return self.u_d + u

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        EA, L, b0 = self.E * self.A, self.L, self.b0
        if self.tag == "bar-linear":
            return self.t / EA + 0.0 * x
        if self.tag == "bar-quadratic":
            return b0 * (L - x) / EA
        if self.tag == "bar-cubic":
            return b0 * (L ** 2 - x ** 2) / (2 * EA)
        return b0 * (L ** 3 - x ** 3) / (3 * EA)

    def load(self, x):
        """Body load per unit length (zero for the tip-traction case)."""
        x = np.asarray(x, dtype=float)
        if self.tag == "bar-linear":
            return 0.0 * x
        if self.tag == "bar-quadratic":
            return self.b0 + 0.0 * x
        if self.tag == "bar-cubic":
            return self.b0 * x
        return self.b0 * x ** 2


def bar_solution(tag: str, params: dict, x) -> tuple[np.ndarray, np.ndarray]:
    """Value and derivative of a bar solution at axial positions ``x``."""
    sol = BarSolution(tag, **params)
    return sol.value(x), sol.gradient(x)


@dataclass(frozen=True)
class CylinderSolution:
    """Temperature around a heated circular inclusion in an infinite medium."""

    theta_d: float = 0.375
    q: float = 1.0
    kappa_i: float = 1.0
    kappa_ii: float = 0.125
    a: float = 0.5

    def value(self, r):
        r = np.asarray(r, dtype=float)
        a, q = self.a, self.q
        inner = self.theta_d - q * r ** 2 / (4 * self.kappa_i)
        with np.errstate(divide="ignore"):
            outer = (self.theta_d - q * a ** 2 / (4 * self.kappa_i)
                     - q * a ** 2 / (2 * self.kappa_ii) * np.log(np.maximum(r, 1e-300) / a))
        return np.where(r <= a, inner, outer)

    def radial_gradient(self, r):
        r = np.asarray(r, dtype=float)
        a, q = self.a, self.q
        inner = -q * r / (2 * self.kappa_i)
        outer = -q * a ** 2 / (2 * self.kappa_ii * np.maximum(r, 1e-300))
        return np.where(r <= a, inner, outer)


def cylinder_solution(params: dict, r) -> tuple[np.ndarray, np.ndarray]:
    sol = CylinderSolution(**params)
    return sol.value(r), sol.radial_gradient(r)


@dataclass
class ErrorReport:
    """Metrics of one benchmark run; ``params`` holds study-specific keys."""

    study: str
    p: int
    h: float
    h_int: float
    gamma_n: float
    gamma_g: float
    dofs: int
    l2: float
    h1: float
    e_geo: float = float("nan")
    cond: float = float("nan")
    residual: float = float("nan")
    params: dict = field(default_factory=dict)

    def row(self) -> dict:
        out = {"study": self.study, "p": self.p, "h": self.h, "h_int": self.h_int,
               "gamma_n": self.gamma_n, "gamma_g": self.gamma_g}
        out.update(self.params)
        out.update({"dofs": self.dofs, "L2": self.l2, "H1": self.h1, "e_geo": self.e_geo,
                    "cond": self.cond, "residual": self.residual})
        return out

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def l2_error(solution, reference, order: int | None = None) -> float:
    """Relative L2 error of a solved field against ``reference(pts, material)``."""
    return solution.errors(reference, order)[0]


def h1_seminorm_error(solution, reference, order: int | None = None) -> float:
    """Relative H1 semi-norm error of a solved field."""
    return solution.errors(reference, order)[1]


def geo_error(mesh: CutMesh, material: int, reference_area: float) -> float:
    """Signed relative area error ``(V_h - V) / V`` of one material."""
    return mesh.geometric_error(material, reference_area)


def convergence_rate(h, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.size < 2 or h.size != e.size:
        raise ValueError("need at least two (h, error) pairs of equal length")
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("mesh sizes and errors must be positive")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def run_benchmark(study: str, config: dict | None = None) -> list[ErrorReport]:
    """Run one of the benchmark studies over its parameter grid."""
    from .benchmarks import run_study

    return run_study(study, **(config or {}))
