"""
Background mesh classification, conforming subdivision of cut elements,
interface extraction, connected components and ghost facets.

Every background element is split into a uniform ``2**level`` lattice of
sub-squares (the integration grid). Level sets are sampled at lattice nodes
and sub-square centroids, snapped away from the iso-level, and treated as
linear along every edge. Sub-squares whose five samples share one phase are
merged back into the largest uniform quadtree blocks; every other sub-square
is split into four triangles about its centroid, and each triangle is cut by
the level sets one after the other.

Each cell edge carries a symbolic tag naming the straight line it lies on
(lattice line, half-diagonal, cut line, fan diagonal). Two cells are adjacent
when they have edges with the same tag whose intervals overlap with nonzero
length, which avoids any geometric hashing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import PhaseMap, phase_indices, snap_values
from .quadrature import quads_quadrature, triangles_quadrature
from .splines import TensorBSplineBasis

log = logging.getLogger(__name__)

SIDES = ("bottom", "right", "top", "left")
_SIDE_NORMALS = {
    "bottom": (0.0, -1.0),
    "right": (1.0, 0.0),
    "top": (0.0, 1.0),
    "left": (-1.0, 0.0),
}

AREA_FLOOR = 1e-12
LENGTH_TOL = 1e-12


@dataclass(frozen=True)
class IntegrationCell:
    """Single-phase triangle or axis-aligned quad inside one background element."""

    kind: str
    vertices: np.ndarray
    element: int
    phase: int
    material: int
    component: int

    @property
    def area(self) -> float:
        v = self.vertices
        if self.kind == "quad":
            d = v[2] - v[0]
            return float(d[0] * d[1])
        e1, e2 = v[1] - v[0], v[2] - v[0]
        return float(0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0]))


@dataclass(frozen=True)
class Segment:
    """Straight piece of a material interface or of the domain boundary.

    For interfaces ``materials = (I, J)`` with ``I < J`` and the normal points
    from ``I`` into ``J``. For boundaries ``materials = (M, 0)``, the normal is
    outward and ``components[1] == -1``. ``surface`` is the level-set index
    that produced the segment or a side name of the background box.
    """

    p0: np.ndarray
    p1: np.ndarray
    element: int
    materials: tuple[int, int]
    components: tuple[int, int]
    normal: np.ndarray
    surface: int | str

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.p1 - self.p0))

    @property
    def is_boundary(self) -> bool:
        return self.materials[1] == 0


@dataclass
class ElementCut:
    """Integration cells and derived topology of one background element."""

    element: int
    lo: np.ndarray
    hi: np.ndarray
    tri: np.ndarray
    tri_phase: np.ndarray
    tri_material: np.ndarray
    tri_comp: np.ndarray
    quad_lo: np.ndarray
    quad_hi: np.ndarray
    quad_phase: np.ndarray
    quad_material: np.ndarray
    quad_comp: np.ndarray
    comp_material: np.ndarray
    comp_area: np.ndarray
    # traces[c][s] is a list of (a, b) intervals of component c on side s
    traces: list
    segments: list = field(default_factory=list)
    dropped_area: float = 0.0

    @property
    def n_components(self) -> int:
        return len(self.comp_material)

    @property
    def materials(self) -> set[int]:
        return set(int(m) for m in self.comp_material)

    @property
    def is_cut(self) -> bool:
        """True if a material interface or the domain boundary crosses the element."""
        return len(self.materials) > 1

    @property
    def is_uniform(self) -> bool:
        return len(self.tri) == 0 and len(self.quad_lo) == 1

    @property
    def material_area(self) -> float:
        return float(self.comp_area[self.comp_material > 0].sum())

    def material_measure(self, material: int) -> float:
        return float(self.comp_area[self.comp_material == material].sum())

    def cells(self) -> list[IntegrationCell]:
        out = []
        for t in range(len(self.tri)):
            out.append(IntegrationCell("tri", self.tri[t], self.element, int(self.tri_phase[t]),
                                       int(self.tri_material[t]), int(self.tri_comp[t])))
        for q in range(len(self.quad_lo)):
            lo, hi = self.quad_lo[q], self.quad_hi[q]
            v = np.array([lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
            out.append(IntegrationCell("quad", v, self.element, int(self.quad_phase[q]),
                                       int(self.quad_material[q]), int(self.quad_comp[q])))
        return out

    def quadrature(self, component: int, order: int) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature points and weights over all cells of one component."""
        pts, wts = [], []
        mt = self.tri_comp == component
        if np.any(mt):
            p, w = triangles_quadrature(self.tri[mt], order)
            pts.append(p)
            wts.append(w)
        mq = self.quad_comp == component
        if np.any(mq):
            p, w = quads_quadrature(self.quad_lo[mq], self.quad_hi[mq], order)
            pts.append(p)
            wts.append(w)
        if not pts:
            return np.zeros((0, 2)), np.zeros(0)
        return np.concatenate(pts), np.concatenate(wts)


@dataclass(frozen=True)
class Facet:
    """Interior facet shared by ``plus`` (left/bottom) and ``minus`` (right/top).

    ``normal`` is the outward normal of ``plus``; ``extent`` is the facet's
    interval along its own direction.
    """

    index: int
    plus: int
    minus: int
    axis: int
    position: float
    extent: tuple[float, float]

    @property
    def normal(self) -> np.ndarray:
        n = np.zeros(2)
        n[self.axis] = 1.0
        return n

    @property
    def plus_side(self) -> int:
        return 1 if self.axis == 0 else 2

    @property
    def minus_side(self) -> int:
        return 3 if self.axis == 0 else 0

    @property
    def length(self) -> float:
        return self.extent[1] - self.extent[0]

    def point(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        pts = np.empty((s.size, 2))
        pts[:, self.axis] = self.position
        pts[:, 1 - self.axis] = s
        return pts


@dataclass(frozen=True)
class GhostFacet:
    """Ghost facet with its matched same-material component pairs.

    ``pairs`` holds ``(plus_comp, minus_comp, material, intervals)`` where the
    intervals are the overlap of both components' traces on the facet.
    """

    facet: Facet
    pairs: tuple


# ---------------------------------------------------------------------------
# small helpers

def _merge_intervals(iv: list[tuple[float, float]], tol: float) -> list[tuple[float, float]]:
    if not iv:
        return []
    iv = sorted(iv)
    out = [list(iv[0])]
    for a, b in iv[1:]:
        if a <= out[-1][1] + tol:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def intersect_intervals(A, B, tol: float) -> list[tuple[float, float]]:
    """Pairwise intersections longer than ``tol`` of two interval lists."""
    out = []
    for a0, a1 in A:
        for b0, b1 in B:
            lo, hi = max(a0, b0), min(a1, b1)
            if hi - lo > tol:
                out.append((lo, hi))
    return out


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb

    def labels(self) -> np.ndarray:
        roots = [self.find(i) for i in range(len(self.parent))]
        remap = {}
        return np.array([remap.setdefault(r, len(remap)) for r in roots], dtype=np.int64)


def _overlapping_pairs(edges: list, tol: float):
    """Yield ``(edge_a, edge_b, s0, s1, origin, direction)`` for collinear overlaps.

    All edges share one supporting line; ``s`` is the arc parameter along it.
    """
    if len(edges) < 2:
        return
    _, _, x0, y0, x1, y1 = edges[0]
    dx, dy = x1 - x0, y1 - y0
    norm = (dx * dx + dy * dy) ** 0.5
    if norm == 0.0:
        for e in edges[1:]:
            dx, dy = e[4] - e[2], e[5] - e[3]
            norm = (dx * dx + dy * dy) ** 0.5
            if norm > 0.0:
                break
        else:
            return
    dx, dy = dx / norm, dy / norm
    iv = []
    for e in edges:
        sa = (e[2] - x0) * dx + (e[3] - y0) * dy
        sb = (e[4] - x0) * dx + (e[5] - y0) * dy
        if sa > sb:
            sa, sb = sb, sa
        if sb - sa > tol:
            iv.append((sa, sb, e))
    iv.sort(key=lambda t: (t[0], t[1]))
    active = []
    for sa, sb, e in iv:
        active = [a for a in active if a[1] > sa + tol]
        for a in active:
            hi = min(a[1], sb)
            if hi - sa > tol:
                yield a[2], e, sa, hi, (x0, y0), (dx, dy)
        active.append((sa, sb, e))


def _clip(poly, l: int, iso: float, cut_tag):
    """Split a convex polygon by the linear function stored in slot ``l``.

    ``poly`` is a list of ``(x, y, vals, tag)`` where ``tag`` names the edge
    leaving that vertex. Returns ``(below, above)`` polygons.
    """
    n = len(poly)
    side = [v[2][l] > iso for v in poly]
    if all(side):
        return [], poly
    if not any(side):
        return poly, []
    below, above = [], []
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        sa, sb = side[i], side[(i + 1) % n]
        (above if sa else below).append(a)
        if sa != sb:
            # canonical endpoint order so both neighbours compute the same point
            p, q = (a, b) if (a[0], a[1]) <= (b[0], b[1]) else (b, a)
            gp, gq = p[2][l], q[2][l]
            t = (gp - iso) / (gp - gq)
            x = p[0] + t * (q[0] - p[0])
            y = p[1] + t * (q[1] - p[1])
            vals = tuple(vp + t * (vq - vp) for vp, vq in zip(p[2], q[2]))
            vals = vals[:l] + (iso,) + vals[l + 1:]
            if sa:
                above.append((x, y, vals, cut_tag))
                below.append((x, y, vals, a[3]))
            else:
                below.append((x, y, vals, cut_tag))
                above.append((x, y, vals, a[3]))
    return below, above


def _dedupe(poly, tol: float):
    out = []
    for v in poly:
        if out and abs(v[0] - out[-1][0]) <= tol and abs(v[1] - out[-1][1]) <= tol:
            # zero-length edge: keep the point, take the tag of the edge that follows
            out[-1] = out[-1][:3] + (v[3],)
            continue
        out.append(v)
    while len(out) > 1 and abs(out[0][0] - out[-1][0]) <= tol and abs(out[0][1] - out[-1][1]) <= tol:
        out.pop()
    return out


# ---------------------------------------------------------------------------

class CutMesh:
    """Integration mesh of a background B-spline mesh cut by level sets.

    Parameters
    ----------
    basis : TensorBSplineBasis
        Background mesh (its elements are the nonempty knot spans).
    levelsets : sequence of callables
        Each maps ``(npts, 2)`` points to values and has an ``iso`` attribute
        (0 if missing).
    phase_map : PhaseMap
    level : int
        Integration-grid refinement; each element is split ``2**level`` times
        per direction before subdivision.
    snap : float
        Snap tolerance relative to the element edge length.
    """

    def __init__(self, basis: TensorBSplineBasis, levelsets: Sequence[Callable],
                 phase_map: PhaseMap, level: int = 0, snap: float = 1e-8):
        if level < 0:
            raise ValueError("refinement level must be >= 0")
        if phase_map.n_levelsets != len(levelsets):
            raise ValueError(
                f"phase map expects {phase_map.n_levelsets} level sets, got {len(levelsets)}")
        self.basis = basis
        self.levelsets = list(levelsets)
        self.phase_map = phase_map
        self.level = level
        self.h = min(basis.h)
        self.eps = snap * self.h
        self.iso = np.array([getattr(f, "iso", 0.0) for f in self.levelsets], dtype=float)
        self._sample()
        self.elements = [self._build_element(e) for e in range(basis.n_elements)]
        self._facets = None
        self._link_cache: dict = {}

    # -- sampling ----------------------------------------------------------
    def _sample(self):
        b = self.basis
        nx, ny = b.shape
        N = 2 ** self.level
        (x0, y0), (x1, y1) = b.box
        bx = b.kv_x.breakpoints
        by = b.kv_y.breakpoints
        # lattice coordinates built per element so element boundaries are exact
        sub = np.arange(N) / N
        xs = np.concatenate([bx[i] + (bx[i + 1] - bx[i]) * sub for i in range(nx)] + [[x1]])
        ys = np.concatenate([by[j] + (by[j + 1] - by[j]) * sub for j in range(ny)] + [[y1]])
        self.xs, self.ys = xs, ys
        X, Y = np.meshgrid(xs, ys)
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        xc = 0.5 * (xs[:-1] + xs[1:])
        yc = 0.5 * (ys[:-1] + ys[1:])
        XC, YC = np.meshgrid(xc, yc)
        cents = np.column_stack([XC.ravel(), YC.ravel()])
        nl = len(self.levelsets)
        self.node_values = np.empty((nl, len(ys), len(xs)))
        self.cent_values = np.empty((nl, len(yc), len(xc)))
        for l, f in enumerate(self.levelsets):
            self.node_values[l] = snap_values(f(nodes), self.iso[l], self.eps).reshape(len(ys), len(xs))
            self.cent_values[l] = snap_values(f(cents), self.iso[l], self.eps).reshape(len(yc), len(xc))
        Pn = phase_indices(self.node_values.reshape(nl, -1), self.iso).reshape(len(ys), len(xs))
        Pc = phase_indices(self.cent_values.reshape(nl, -1), self.iso).reshape(len(yc), len(xc))
        same = (Pn[:-1, :-1] == Pc) & (Pn[1:, :-1] == Pc) & (Pn[:-1, 1:] == Pc) & (Pn[1:, 1:] == Pc)
        self.codes = np.where(same, Pc, -1)
        self.node_phase = Pn

    # -- per element ------------------------------------------------------
    def _build_element(self, e: int) -> ElementCut:
        b = self.basis
        ix, iy = b.element_index(e)
        N = 2 ** self.level
        lo, hi = b.element_bounds(e)
        codes = self.codes[iy * N:(iy + 1) * N, ix * N:(ix + 1) * N]
        c0 = codes[0, 0]
        if c0 >= 0 and np.all(codes == c0):
            return self._uniform_element(e, lo, hi, int(c0))
        return self._cut_element(e, lo, hi, codes)

    def _uniform_element(self, e, lo, hi, P) -> ElementCut:
        M = self.phase_map.material_of(P)
        area = float(np.prod(hi - lo))
        traces = [[[(lo[0], hi[0])], [(lo[1], hi[1])], [(lo[0], hi[0])], [(lo[1], hi[1])]]]
        cut = ElementCut(
            element=e, lo=lo, hi=hi,
            tri=np.zeros((0, 3, 2)), tri_phase=np.zeros(0, int), tri_material=np.zeros(0, int),
            tri_comp=np.zeros(0, int),
            quad_lo=lo[None, :].copy(), quad_hi=hi[None, :].copy(),
            quad_phase=np.array([P]), quad_material=np.array([M]), quad_comp=np.array([0]),
            comp_material=np.array([M]), comp_area=np.array([area]), traces=traces)
        if M != 0:
            cut.segments = self._box_segments_uniform(e, lo, hi, M)
        return cut

    def _box_sides(self, e) -> list[str]:
        nx, ny = self.basis.shape
        ix, iy = self.basis.element_index(e)
        sides = []
        if iy == 0:
            sides.append("bottom")
        if ix == nx - 1:
            sides.append("right")
        if iy == ny - 1:
            sides.append("top")
        if ix == 0:
            sides.append("left")
        return sides

    def _box_segments_uniform(self, e, lo, hi, M) -> list[Segment]:
        corners = {
            "bottom": (lo, np.array([hi[0], lo[1]])),
            "right": (np.array([hi[0], lo[1]]), hi),
            "top": (hi, np.array([lo[0], hi[1]])),
            "left": (np.array([lo[0], hi[1]]), lo),
        }
        segs = []
        for s in self._box_sides(e):
            p0, p1 = corners[s]
            segs.append(Segment(p0.copy(), p1.copy(), e, (M, 0), (0, -1),
                                np.array(_SIDE_NORMALS[s]), s))
        return segs

    def _cut_element(self, e, lo, hi, codes) -> ElementCut:
        b = self.basis
        ix, iy = b.element_index(e)
        N = 2 ** self.level
        pm = self.phase_map
        nl = len(self.levelsets)
        h = self.h
        area_floor = AREA_FLOOR * h * h
        ltol = LENGTH_TOL * h
        xs = self.xs[ix * N: (ix + 1) * N + 1]
        ys = self.ys[iy * N: (iy + 1) * N + 1]
        nv = self.node_values[:, iy * N: (iy + 1) * N + 1, ix * N: (ix + 1) * N + 1]
        cv = self.cent_values[:, iy * N: (iy + 1) * N, ix * N: (ix + 1) * N]

        quads = []   # (i0, j0, size, phase)
        cutsq = []   # (i, j)
        stack = [(0, 0, N)]
        while stack:
            i0, j0, s = stack.pop()
            block = codes[j0:j0 + s, i0:i0 + s]
            c = block[0, 0]
            if c >= 0 and np.all(block == c):
                quads.append((i0, j0, s, int(c)))
            elif s == 1:
                cutsq.append((i0, j0))
            else:
                hs = s // 2
                stack.extend([(i0 + hs, j0 + hs, hs), (i0, j0 + hs, hs), (i0 + hs, j0, hs), (i0, j0, hs)])
        quads.sort(key=lambda q: (q[1], q[0]))
        cutsq.sort(key=lambda q: (q[1], q[0]))

        edges = []     # (cell, tag, x0, y0, x1, y1)
        cell_mat = []
        cell_phase = []
        cell_area = []
        quad_lo, quad_hi = [], []
        for (i0, j0, s, P) in quads:
            cid = len(cell_mat)
            xa, xb, ya, yb = xs[i0], xs[i0 + s], ys[j0], ys[j0 + s]
            quad_lo.append((xa, ya))
            quad_hi.append((xb, yb))
            cell_mat.append(pm.material_of(P))
            cell_phase.append(P)
            cell_area.append((xb - xa) * (yb - ya))
            edges.append((cid, ("gy", j0), xa, ya, xb, ya))
            edges.append((cid, ("gx", i0 + s), xb, ya, xb, yb))
            edges.append((cid, ("gy", j0 + s), xb, yb, xa, yb))
            edges.append((cid, ("gx", i0), xa, yb, xa, ya))
        nquad = len(quad_lo)

        tris = []
        keep = []
        dropped = 0.0
        for (i, j) in cutsq:
            corners = [
                (xs[i], ys[j], tuple(nv[:, j, i])),
                (xs[i + 1], ys[j], tuple(nv[:, j, i + 1])),
                (xs[i + 1], ys[j + 1], tuple(nv[:, j + 1, i + 1])),
                (xs[i], ys[j + 1], tuple(nv[:, j + 1, i])),
            ]
            m = (0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]), tuple(cv[:, j, i]))
            side_tags = [("gy", j), ("gx", i + 1), ("gy", j + 1), ("gx", i)]
            for t in range(4):
                a, bb = corners[t], corners[(t + 1) % 4]
                poly = [
                    (a[0], a[1], a[2], side_tags[t]),
                    (bb[0], bb[1], bb[2], ("d", i, j, (t + 1) % 4)),
                    (m[0], m[1], m[2], ("d", i, j, t)),
                ]
                pieces = [poly]
                for l in range(nl):
                    nxt = []
                    for pc in pieces:
                        below, above = _clip(pc, l, self.iso[l], ("c", i, j, t, l))
                        if len(below) >= 3:
                            nxt.append(below)
                        if len(above) >= 3:
                            nxt.append(above)
                    pieces = nxt
                for k, pc in enumerate(pieces):
                    pc = _dedupe(pc, ltol)
                    if len(pc) < 3:
                        continue
                    mean = np.mean([v[2] for v in pc], axis=0)
                    P = int(phase_indices(np.asarray(mean)[:, None], self.iso)[0])
                    M = pm.material_of(P)
                    x0_, y0_ = pc[0][0], pc[0][1]
                    nvtx = len(pc)
                    for q in range(1, nvtx - 1):
                        v1, v2 = pc[q], pc[q + 1]
                        ar = 0.5 * ((v1[0] - x0_) * (v2[1] - y0_) - (v1[1] - y0_) * (v2[0] - x0_))
                        # slivers stay in the topology so adjacency chains are
                        # not broken, but they get no quadrature points
                        tiny = ar < area_floor
                        if tiny:
                            dropped += abs(ar)
                            log.debug("element %d: degenerate cell of area %.3e skipped", e, ar)
                        cid = len(cell_mat)
                        tris.append(((x0_, y0_), (v1[0], v1[1]), (v2[0], v2[1])))
                        keep.append(not tiny)
                        cell_mat.append(M)
                        cell_phase.append(P)
                        cell_area.append(0.0 if tiny else ar)
                        tag01 = pc[0][3] if q == 1 else ("f", i, j, t, k, q)
                        tag20 = pc[nvtx - 1][3] if q == nvtx - 2 else ("f", i, j, t, k, q + 1)
                        edges.append((cid, tag01, x0_, y0_, v1[0], v1[1]))
                        edges.append((cid, v1[3], v1[0], v1[1], v2[0], v2[1]))
                        edges.append((cid, tag20, v2[0], v2[1], x0_, y0_))

        ncell = len(cell_mat)
        groups: dict = {}
        for ed in edges:
            groups.setdefault(ed[1], []).append(ed)

        uf = _UnionFind(ncell)
        seg_pairs = []
        for tag, group in groups.items():
            for ea, eb, s0, s1, org, d in _overlapping_pairs(group, ltol):
                ca, cb = ea[0], eb[0]
                if cell_mat[ca] == cell_mat[cb]:
                    uf.union(ca, cb)
                elif tag[0] == "c":
                    seg_pairs.append((tag, ea, eb, s0, s1, org, d))
        comp = uf.labels()
        ncomp = int(comp.max()) + 1 if ncell else 0
        comp_material = np.zeros(ncomp, dtype=np.int64)
        comp_area = np.zeros(ncomp)
        for c_id in range(ncell):
            comp_material[comp[c_id]] = cell_mat[c_id]
            comp_area[comp[c_id]] += cell_area[c_id]

        # traces of components on the four element sides
        traces = [[[] for _ in range(4)] for _ in range(ncomp)]
        side_tags = {("gy", 0): 0, ("gx", N): 1, ("gy", N): 2, ("gx", 0): 3}
        for tag, s in side_tags.items():
            for ed in groups.get(tag, []):
                a, bnd = (ed[2], ed[4]) if s in (0, 2) else (ed[3], ed[5])
                if a > bnd:
                    a, bnd = bnd, a
                if bnd - a > ltol:
                    traces[comp[ed[0]]][s].append((a, bnd))
        for c in range(ncomp):
            for s in range(4):
                traces[c][s] = _merge_intervals(traces[c][s], ltol)

        segments = []
        for tag, ea, eb, s0, s1, org, d in seg_pairs:
            ca, cb = ea[0], eb[0]
            ma, mb = cell_mat[ca], cell_mat[cb]
            p0 = np.array([org[0] + s0 * d[0], org[1] + s0 * d[1]])
            p1 = np.array([org[0] + s1 * d[0], org[1] + s1 * d[1]])
            # outward normal of cell a's edge (cells are counter-clockwise)
            ex, ey = ea[4] - ea[2], ea[5] - ea[3]
            ln = (ex * ex + ey * ey) ** 0.5
            na = np.array([ey / ln, -ex / ln])
            if ma == 0 or mb == 0:
                if ma == 0:
                    segments.append(Segment(p0, p1, e, (mb, 0), (int(comp[cb]), -1), -na, tag[4]))
                else:
                    segments.append(Segment(p0, p1, e, (ma, 0), (int(comp[ca]), -1), na, tag[4]))
            elif ma < mb:
                segments.append(Segment(p0, p1, e, (ma, mb), (int(comp[ca]), int(comp[cb])), na, tag[4]))
            else:
                segments.append(Segment(p0, p1, e, (mb, ma), (int(comp[cb]), int(comp[ca])), -na, tag[4]))

        # pieces of the background box boundary
        box_tags = {"bottom": ("gy", 0), "right": ("gx", N), "top": ("gy", N), "left": ("gx", 0)}
        for side in self._box_sides(e):
            for ed in groups.get(box_tags[side], []):
                M = cell_mat[ed[0]]
                if M == 0:
                    continue
                p0 = np.array([ed[2], ed[3]])
                p1 = np.array([ed[4], ed[5]])
                if np.linalg.norm(p1 - p0) > ltol:
                    segments.append(Segment(p0, p1, e, (M, 0), (int(comp[ed[0]]), -1),
                                            np.array(_SIDE_NORMALS[side]), side))

        cell_mat = np.asarray(cell_mat, dtype=np.int64)
        cell_phase = np.asarray(cell_phase, dtype=np.int64)
        keep = np.asarray(keep, dtype=bool)
        tris = np.asarray(tris, dtype=float).reshape(len(keep), 3, 2)[keep]
        return ElementCut(
            element=e, lo=lo, hi=hi,
            tri=tris, tri_phase=cell_phase[nquad:][keep], tri_material=cell_mat[nquad:][keep],
            tri_comp=comp[nquad:][keep],
            quad_lo=np.asarray(quad_lo, dtype=float).reshape(nquad, 2),
            quad_hi=np.asarray(quad_hi, dtype=float).reshape(nquad, 2),
            quad_phase=cell_phase[:nquad], quad_material=cell_mat[:nquad], quad_comp=comp[:nquad],
            comp_material=comp_material, comp_area=comp_area, traces=traces,
            segments=segments, dropped_area=dropped)

    # -- queries ------------------------------------------------------------
    def __getitem__(self, e: int) -> ElementCut:
        return self.elements[e]

    def __len__(self) -> int:
        return len(self.elements)

    def active_elements(self) -> np.ndarray:
        """Elements with a nonzero material area (the set K_Omega)."""
        return np.array([c.element for c in self.elements if c.material_area > 0.0], dtype=int)

    def cells(self) -> list[IntegrationCell]:
        out = []
        for c in self.elements:
            out.extend(c.cells())
        return out

    def segments(self) -> list[Segment]:
        out = []
        for c in self.elements:
            out.extend(c.segments)
        return out

    def interfaces(self) -> list[Segment]:
        return [s for s in self.segments() if not s.is_boundary]

    def boundaries(self, surface=None) -> list[Segment]:
        segs = [s for s in self.segments() if s.is_boundary]
        if surface is not None:
            segs = [s for s in segs if s.surface == surface]
        return segs

    def material_area(self, material: int) -> float:
        return sum(c.material_measure(material) for c in self.elements)

    def interior_facets(self) -> list[Facet]:
        """Facets between two elements of K_Omega."""
        if self._facets is None:
            b = self.basis
            nx, ny = b.shape
            active = np.zeros(b.n_elements, dtype=bool)
            active[self.active_elements()] = True
            facets = []
            for iy in range(ny):
                for ix in range(nx - 1):
                    e0, e1 = ix + nx * iy, ix + 1 + nx * iy
                    if active[e0] and active[e1]:
                        lo, hi = b.element_bounds(e0)
                        facets.append(Facet(len(facets), e0, e1, 0, float(hi[0]), (float(lo[1]), float(hi[1]))))
            for iy in range(ny - 1):
                for ix in range(nx):
                    e0, e1 = ix + nx * iy, ix + nx * (iy + 1)
                    if active[e0] and active[e1]:
                        lo, hi = b.element_bounds(e0)
                        facets.append(Facet(len(facets), e0, e1, 1, float(hi[1]), (float(lo[0]), float(hi[0]))))
            self._facets = facets
        return self._facets

    def matched_pairs(self, facet: Facet) -> list:
        """Same-material component pairs whose facet traces overlap."""
        plus = self.elements[facet.plus]
        minus = self.elements[facet.minus]
        tol = LENGTH_TOL * self.h
        pairs = []
        for i in range(plus.n_components):
            Mi = int(plus.comp_material[i])
            if Mi == 0:
                continue
            for j in range(minus.n_components):
                if int(minus.comp_material[j]) != Mi:
                    continue
                ov = intersect_intervals(plus.traces[i][facet.plus_side],
                                         minus.traces[j][facet.minus_side], tol)
                if ov:
                    pairs.append((i, j, Mi, tuple(ov)))
        return pairs

    def ghost_facets(self) -> list[GhostFacet]:
        """Interior facets next to at least one cut element, with matched pairs."""
        out = []
        for f in self.interior_facets():
            if self.elements[f.plus].is_cut or self.elements[f.minus].is_cut:
                out.append(GhostFacet(f, tuple(self.matched_pairs(f))))
        return out

    def _links_of(self, e: int) -> list:
        """Same-material component links from ``e`` to its right and top neighbours."""
        links = self._link_cache.get(e)
        if links is None:
            links = []
            nx, ny = self.basis.shape
            ix, iy = self.basis.element_index(e)
            tol = LENGTH_TOL * self.h
            A = self.elements[e]
            for other, ok, s_here, s_there in ((e + 1, ix < nx - 1, 1, 3), (e + nx, iy < ny - 1, 2, 0)):
                if not ok:
                    continue
                B = self.elements[other]
                for i in range(A.n_components):
                    for j in range(B.n_components):
                        if A.comp_material[i] != B.comp_material[j]:
                            continue
                        if intersect_intervals(A.traces[i][s_here], B.traces[j][s_there], tol):
                            links.append((e, i, other, j))
            self._link_cache[e] = links
        return links

    def component_links(self, elements=None) -> list:
        """Links ``(e, i, e2, j)`` between components of adjacent elements.

        Only links with both elements in ``elements`` (all if None) are kept.
        """
        if elements is None:
            elements = range(len(self.elements))
        eset = set(int(e) for e in elements)
        out = []
        for e in sorted(eset):
            for link in self._links_of(e):
                if link[2] in eset:
                    out.append(link)
        return out

    def geometric_error(self, material: int, reference_area: float) -> float:
        if not reference_area > 0:
            raise ValueError("reference area must be positive")
        return (self.material_area(material) - reference_area) / reference_area


def classify_element(corner_values: np.ndarray, iso=0.0) -> tuple[str, int | None]:
    """Classify an element from snapped corner values of shape ``(n_levelsets, 4)``.

    Returns ``("uniform", P)`` if all corners share one sign vector and
    ``("intersected", None)`` otherwise.
    """
    P = phase_indices(np.atleast_2d(corner_values), iso)
    if np.all(P == P[0]):
        return "uniform", int(P[0])
    return "intersected", None


def connected_components(mesh: "CutMesh", elements) -> dict[tuple[int, int], int]:
    """Label ``(element, component)`` pairs connected across shared facets.

    Two element components are joined when they carry the same material and
    their traces on a facet shared by two elements of ``elements`` overlap
    with nonzero length. Labels are dense, ordered by first appearance in
    ascending element order, so the result does not depend on cell order.
    """
    elements = sorted(set(int(e) for e in elements))
    index = {}
    for e in elements:
        for c in range(mesh[e].n_components):
            index[(e, c)] = len(index)
    uf = _UnionFind(len(index))
    for e, i, other, j in mesh.component_links(elements):
        uf.union(index[(e, i)], index[(other, j)])
    labels = uf.labels()
    return {key: int(labels[i]) for key, i in index.items()}


def refine_integration_grid(basis: TensorBSplineBasis, level: int) -> tuple[np.ndarray, np.ndarray]:
    """Lattice lines of the integration grid: each element split ``2**level`` times."""
    if level < 0:
        raise ValueError("level must be >= 0")
    N = 2 ** level
    bx, by = basis.kv_x.breakpoints, basis.kv_y.breakpoints
    sub = np.arange(N) / N
    xs = np.concatenate([bx[i] + (bx[i + 1] - bx[i]) * sub for i in range(len(bx) - 1)] + [bx[-1:]])
    ys = np.concatenate([by[j] + (by[j + 1] - by[j]) * sub for j in range(len(by) - 1)] + [by[-1:]])
    return xs, ys


def quadrature_for_cell(cell: IntegrationCell, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature for one cell: 7/12/25-point triangles or ``(p+1)^2`` Gauss quads."""
    if p < 1:
        raise ValueError(f"unsupported order {p}")
    if cell.kind == "tri":
        return triangles_quadrature(cell.vertices[None], p)
    return quads_quadrature(cell.vertices[0], cell.vertices[2], p)
