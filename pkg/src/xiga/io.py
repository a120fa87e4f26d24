"""
Output writers: VTK legacy ASCII fields and meshes, CSV tables, JSON reports.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

VTK_LINE, VTK_TRIANGLE, VTK_QUAD = 3, 5, 9


def _header(fh, title: str):
    fh.write("# vtk DataFile Version 3.0\n")
    fh.write(title.replace("\n", " ")[:250] + "\n")
    fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")


def _points(fh, pts: np.ndarray):
    fh.write(f"POINTS {len(pts)} double\n")
    for x, y in pts:
        fh.write(f"{x:.17g} {y:.17g} 0\n")


def _cells(fh, conn: list[list[int]], types: list[int]):
    size = sum(len(c) + 1 for c in conn)
    fh.write(f"CELLS {len(conn)} {size}\n")
    for c in conn:
        fh.write(f"{len(c)} " + " ".join(map(str, c)) + "\n")
    fh.write(f"CELL_TYPES {len(types)}\n")
    fh.write("\n".join(map(str, types)) + "\n")


def _array(fh, name: str, data: np.ndarray):
    data = np.asarray(data)
    if data.ndim == 1 or data.shape[1] == 1:
        kind = "int" if np.issubdtype(data.dtype, np.integer) else "double"
        fh.write(f"SCALARS {name} {kind} 1\nLOOKUP_TABLE default\n")
        for v in data.ravel():
            fh.write(f"{v}\n" if kind == "int" else f"{v:.17g}\n")
    else:
        fh.write(f"VECTORS {name} double\n")
        for row in data:
            r = list(row) + [0.0] * (3 - len(row))
            fh.write(" ".join(f"{v:.17g}" for v in r[:3]) + "\n")


def write_solution_vtk(path: str | Path, solution, name: str = "u") -> Path:
    """Field sampled at the vertices of every integration cell.

    Points are duplicated per cell so discontinuities across interfaces are
    preserved. Cell data carries the material and background element.
    """
    mesh = solution.mesh
    pts, conn, types, mat, elem, vals = [], [], [], [], [], []
    n = 0
    for cell in mesh.cells():
        if cell.material == 0:
            continue
        v = np.asarray(cell.vertices, dtype=float)
        vals.append(solution.evaluate(cell.element, cell.component, v)[0])
        pts.append(v)
        conn.append(list(range(n, n + len(v))))
        types.append(VTK_QUAD if cell.kind == "quad" else VTK_TRIANGLE)
        mat.append(cell.material)
        elem.append(cell.element)
        n += len(v)
    path = Path(path)
    with open(path, "w") as fh:
        _header(fh, "solution on integration cells")
        _points(fh, np.concatenate(pts) if pts else np.zeros((0, 2)))
        _cells(fh, conn, types)
        fh.write(f"CELL_DATA {len(conn)}\n")
        _array(fh, "material", np.asarray(mat, dtype=np.int64))
        _array(fh, "element", np.asarray(elem, dtype=np.int64))
        fh.write(f"POINT_DATA {n}\n")
        _array(fh, name, np.concatenate(vals) if vals else np.zeros((0, 1)))
    return path


def write_segments_vtk(path: str | Path, mesh) -> Path:
    """Interface and boundary segments as VTK lines."""
    segs = mesh.segments()
    pts = np.array([p for s in segs for p in (s.p0, s.p1)], dtype=float).reshape(-1, 2)
    conn = [[2 * i, 2 * i + 1] for i in range(len(segs))]
    path = Path(path)
    with open(path, "w") as fh:
        _header(fh, "interface and boundary segments")
        _points(fh, pts)
        _cells(fh, conn, [VTK_LINE] * len(segs))
        fh.write(f"CELL_DATA {len(segs)}\n")
        _array(fh, "material_i", np.array([s.materials[0] for s in segs], dtype=np.int64))
        _array(fh, "material_j", np.array([s.materials[1] for s in segs], dtype=np.int64))
        _array(fh, "normal", np.array([s.normal for s in segs], dtype=float).reshape(-1, 2))
    return path


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else v
    return v


def write_csv(path: str | Path, rows: Iterable[dict]) -> Path:
    """Rows with possibly different keys; columns follow first appearance."""
    rows = list(rows)
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, restval="")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return path


def write_json(path: str | Path, obj) -> Path:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        return _plain(o)

    def clean(o):
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return _plain(o)

    path = Path(path)
    with open(path, "w") as fh:
        json.dump(clean(obj), fh, indent=2, default=default)
        fh.write("\n")
    return path
