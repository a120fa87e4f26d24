"""
JSON run configuration.

A configuration describes one immersed problem: background grid, level sets,
phase-to-material map, materials, physics, loads, boundary conditions,
penalties, integration level, an optional reference solution and outputs.
See ``configs/README.md`` for the schema.

Scalar fields that vary in space (loads, Dirichlet values) accept numbers,
lists (vector fields) or numpy expressions in ``x`` and ``y`` such as
``"sin(2*pi*x)"``.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import ConfigurationError
from .geometry import Circle, LevelSetField, Material, MaterialTable, PhaseMap, Plane, RotatedBox
from .problem import BoundaryCondition, Problem
from .splines import TensorBSplineBasis
from .verification import BarSolution, CylinderSolution
from .weakform import PenaltyConfig

PHYSICS = ("heat", "elasticity")
_EXPR_NAMES = {k: getattr(np, k) for k in (
    "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "hypot", "arctan2", "pi", "minimum", "maximum")}


class ConfigError(ConfigurationError):
    """Configuration error anchored at a line of the source file."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where = f"{source}:{line}: " if line else f"{source}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)


def _key_line(text: str, path: tuple) -> int | None:
    """Best-effort line number of the value at ``path`` (keys and list indices)."""
    pos = 0
    line = None
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            break
        pos = m.start()
        line = text.count("\n", 0, pos) + 1
    return line


def expression(value, name: str = "value") -> Any:
    """Number, list or numpy expression string -> number, tuple or callable of points."""
    if isinstance(value, bool):
        raise ConfigurationError(f"{name}: expected a number, list or expression")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, list):
        if all(isinstance(v, (int, float)) for v in value):
            return tuple(float(v) for v in value)
        parts = [expression(v, name) for v in value]

        def vec(pts):
            pts = np.atleast_2d(pts)
            cols = [np.broadcast_to(p(pts) if callable(p) else p, (len(pts),)) for p in parts]
            return np.column_stack(cols)
        return vec
    if isinstance(value, str):
        try:
            code = compile(value, f"<{name}>", "eval")
        except SyntaxError as exc:
            raise ConfigurationError(f"{name}: invalid expression {value!r}: {exc.msg}") from None
        bad = [n for n in code.co_names if n not in _EXPR_NAMES and n not in ("x", "y")]
        if bad:
            raise ConfigurationError(f"{name}: unknown name {bad[0]!r} in expression {value!r}")

        def f(pts):
            pts = np.atleast_2d(pts)
            env = dict(_EXPR_NAMES, x=pts[:, 0], y=pts[:, 1])
            out = eval(code, {"__builtins__": {}}, env)
            return np.broadcast_to(np.asarray(out, dtype=float), (len(pts),)).copy()
        return f
    raise ConfigurationError(f"{name}: expected a number, list or expression, got {type(value).__name__}")


@dataclass
class RunConfig:
    """Validated run configuration."""

    box: tuple[tuple[float, float], tuple[float, float]]
    cells: tuple[int, int]
    degree: int
    physics: str
    levelsets: list[dict]
    phases: list[int]
    materials: dict[int, dict]
    body_load: Any = None
    boundary: list[dict] = field(default_factory=list)
    penalty: dict = field(default_factory=dict)
    level: int = 0
    reference: dict | None = None
    output: dict = field(default_factory=dict)
    name: str = "run"

    # ----------------------------------------------------------------- parse
    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> "RunConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, exc.lineno, source) from None
        try:
            return cls.from_dict(raw)
        except _PathError as exc:
            raise ConfigError(exc.message, _key_line(text, exc.path), source) from None

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read configuration: {exc.strerror}", None, str(path)) from None
        cfg = cls.from_text(text, str(path))
        if cfg.name == "run":
            cfg.name = path.stem
        return cfg

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise _PathError((), "configuration must be a JSON object")
        known = {"name", "domain", "degree", "physics", "levelsets", "phases", "materials",
                 "body_load", "boundary", "penalty", "level", "reference", "output"}
        for k in raw:
            if k not in known:
                raise _PathError((k,), f"unknown key {k!r}")
        for k in ("domain", "degree", "physics", "levelsets", "phases", "materials"):
            if k not in raw:
                raise _PathError((), f"missing required key {k!r}")
        dom = raw["domain"]
        try:
            box = tuple(tuple(float(v) for v in c) for c in dom["box"])
            cells = tuple(int(v) for v in dom["cells"])
            assert len(box) == 2 and all(len(c) == 2 for c in box) and len(cells) == 2
        except (KeyError, TypeError, ValueError, AssertionError):
            raise _PathError(("domain",), "domain needs 'box' [[x0, y0], [x1, y1]] and 'cells' [nx, ny]") from None
        if min(cells) < 1:
            raise _PathError(("domain", "cells"), "resolutions must be >= 1")
        if not (box[1][0] > box[0][0] and box[1][1] > box[0][1]):
            raise _PathError(("domain", "box"), "box upper corner must exceed the lower corner")
        degree = raw["degree"]
        if not isinstance(degree, int) or degree < 1:
            raise _PathError(("degree",), "degree must be an integer >= 1")
        physics = raw["physics"]
        if physics not in PHYSICS:
            raise _PathError(("physics",), f"physics must be exactly one of {PHYSICS}")
        lsets = raw["levelsets"]
        if not isinstance(lsets, list) or not lsets:
            raise _PathError(("levelsets",), "at least one level set is required")
        for i, ls in enumerate(lsets):
            if not isinstance(ls, dict) or ls.get("type") not in _LEVELSET_TYPES:
                raise _PathError(("levelsets", i), f"level set {i}: 'type' must be one of {sorted(_LEVELSET_TYPES)}")
        mats_raw = raw["materials"]
        if not isinstance(mats_raw, dict) or not mats_raw:
            raise _PathError(("materials",), "materials must be a non-empty object keyed by index")
        materials = {}
        for k, v in mats_raw.items():
            try:
                idx = int(k)
            except ValueError:
                raise _PathError(("materials", k), f"material key {k!r} is not an integer") from None
            if idx < 1:
                raise _PathError(("materials", k), "material indices start at 1; 0 is void")
            if not isinstance(v, dict) or not set(v) <= {"E", "nu", "kappa"}:
                raise _PathError(("materials", k), f"material {idx} accepts only E, nu, kappa")
            materials[idx] = v
        phases = _parse_phases(raw["phases"], len(lsets))
        for P, M in enumerate(phases):
            if M != 0 and M not in materials:
                raise _PathError(("phases",), f"phase {P} refers to undefined material {M}")
        boundary = raw.get("boundary", [])
        if not isinstance(boundary, list):
            raise _PathError(("boundary",), "boundary must be a list")
        for i, bc in enumerate(boundary):
            if not isinstance(bc, dict) or "surface" not in bc or bc.get("kind") not in ("dirichlet", "neumann"):
                raise _PathError(("boundary", i), f"boundary condition {i} needs 'surface' and kind dirichlet|neumann")
            s = bc["surface"]
            if isinstance(s, int) and not 0 <= s < len(lsets):
                raise _PathError(("boundary", i), f"boundary condition {i}: level set {s} does not exist")
        level = raw.get("level", 0)
        if not isinstance(level, int) or level < 0:
            raise _PathError(("level",), "level must be a non-negative integer")
        penalty = raw.get("penalty", {})
        if not isinstance(penalty, dict) or not set(penalty) <= {"gamma_n", "gamma_g", "gamma_itf_scale"}:
            raise _PathError(("penalty",), "penalty accepts gamma_n, gamma_g, gamma_itf_scale")
        ref = raw.get("reference")
        if ref is not None and (not isinstance(ref, dict) or ref.get("type") not in ("bar", "cylinder", "expression")):
            raise _PathError(("reference",), "reference type must be bar, cylinder or expression")
        return cls(box=box, cells=cells, degree=degree, physics=physics, levelsets=lsets,
                   phases=phases, materials=materials, body_load=raw.get("body_load"),
                   boundary=boundary, penalty=penalty, level=level, reference=ref,
                   output=raw.get("output", {}), name=str(raw.get("name", "run")))

    # ----------------------------------------------------------------- build
    def basis(self) -> TensorBSplineBasis:
        return TensorBSplineBasis.uniform(self.degree, self.box, self.cells)

    def build(self) -> Problem:
        """Instantiate the problem; raises :class:`ConfigurationError` on bad values."""
        basis = self.basis()
        lsets = [_make_levelset(ls, i, self) for i, ls in enumerate(self.levelsets)]
        mats = MaterialTable({k: Material(**v) for k, v in self.materials.items()})
        load = self.body_load
        if isinstance(load, dict):
            load = {int(k): expression(v, f"body_load[{k}]") for k, v in load.items()}
        elif load is not None:
            load = expression(load, "body_load")
        bcs = []
        for i, bc in enumerate(self.boundary):
            comps = bc.get("components")
            bcs.append(BoundaryCondition(
                bc["surface"], bc["kind"], expression(bc.get("value", 0.0), f"boundary[{i}].value"),
                tuple(bool(c) for c in comps) if comps is not None else None))
        pen = PenaltyConfig(**{k: float(v) for k, v in self.penalty.items()})
        return Problem(basis, lsets, PhaseMap(len(lsets), tuple(self.phases)), mats,
                       physics=self.physics, body_load=load, boundary=bcs,
                       penalty=pen, level=self.level)

    def reference_function(self) -> Callable | None:
        """``reference(pts, material)`` for the configured closed-form solution."""
        ref = self.reference
        if ref is None:
            return None
        kind = ref["type"]
        if kind == "bar":
            sol = BarSolution(ref.get("tag", "bar-linear"), **ref.get("params", {}))
            o = np.asarray(ref.get("origin", (0.0, 0.0)), dtype=float)
            d = np.asarray(ref.get("direction", (1.0, 0.0)), dtype=float)
            d = d / np.linalg.norm(d)

            def bar(pts, material):
                x0 = (pts - o) @ d
                return sol.value(x0)[:, None] * d, sol.gradient(x0)[:, None, None] * np.outer(d, d)
            return bar
        if kind == "cylinder":
            sol = CylinderSolution(**ref.get("params", {}))
            c = np.asarray(ref.get("center", (0.0, 0.0)), dtype=float)

            def cyl(pts, material):
                dx = pts - c
                r = np.hypot(*dx.T)
                g = sol.radial_gradient(r) / np.maximum(r, 1e-300)
                return sol.value(r)[:, None], (g[:, None] * dx)[:, None, :]
            return cyl
        value = expression(ref["value"], "reference.value")
        grad = [expression(g, "reference.gradient") for g in ref.get("gradient", ["0", "0"])]

        def expr(pts, material):
            v = value(pts) if callable(value) else np.full(len(pts), value)
            g = np.column_stack([gi(pts) if callable(gi) else np.full(len(pts), gi) for gi in grad])
            return v[:, None], g[:, None, :]
        return expr


class _PathError(Exception):
    def __init__(self, path: tuple, message: str):
        super().__init__(message)
        self.path = path
        self.message = message


def _parse_phases(raw, n_levelsets: int) -> list[int]:
    size = 2 ** n_levelsets
    if isinstance(raw, list):
        if len(raw) != size:
            raise _PathError(("phases",), f"phase map needs {size} entries for {n_levelsets} level sets, got {len(raw)}")
        table = raw
    elif isinstance(raw, dict):
        table = [None] * size
        for k, v in raw.items():
            if k == "default":
                continue
            try:
                P = int(k)
            except ValueError:
                raise _PathError(("phases", k), f"phase key {k!r} is not an integer") from None
            if not 0 <= P < size:
                raise _PathError(("phases", k), f"phase {P} out of range for {n_levelsets} level sets")
            table[P] = v
        if "default" in raw:
            table = [raw["default"] if t is None else t for t in table]
        missing = [P for P, t in enumerate(table) if t is None]
        if missing:
            raise _PathError(("phases",), f"phase {missing[0]} has no material entry")
    else:
        raise _PathError(("phases",), "phases must be a list or an object keyed by phase index")
    if not all(isinstance(m, int) and m >= 0 for m in table):
        raise _PathError(("phases",), "material indices must be non-negative integers")
    return list(table)


def _make_levelset(spec: dict, i: int, cfg: RunConfig):
    iso = float(spec.get("iso", 0.0))
    kind = spec["type"]
    try:
        if kind == "plane":
            return Plane(tuple(spec["normal"]), tuple(spec.get("point", (0.0, 0.0))), iso)
        if kind == "circle":
            return Circle(tuple(spec["center"]), float(spec["radius"]), iso)
        if kind == "box":
            return RotatedBox(tuple(spec["center"]), tuple(spec["half_widths"]),
                              float(np.deg2rad(spec.get("angle_deg", 0.0))), iso)
        # coefficient grid on its own tensor basis over the same box
        deg = int(spec.get("degree", 1))
        cells = tuple(spec.get("cells", cfg.cells))
        b = TensorBSplineBasis.uniform(deg, cfg.box, cells)
        if "coefficients" in spec:
            return LevelSetField(b, np.asarray(spec["coefficients"], dtype=float), iso)
        f = expression(spec["expression"], f"levelsets[{i}].expression")
        return LevelSetField.interpolate_nodes(b, f, iso)
    except KeyError as exc:
        raise ConfigurationError(f"level set {i} ({kind}) is missing {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"level set {i} ({kind}): {exc}") from None


_LEVELSET_TYPES = {"plane", "circle", "box", "grid"}
