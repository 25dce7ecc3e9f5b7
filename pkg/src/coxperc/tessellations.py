"""Planar tessellations as segment systems carrying their edge-length measure."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, QhullError

from . import kernels
from .errors import DegenerateInputError, UnsupportedDimensionError
from .geom import BoxWindow, Segment, circumcenters, clip_segments
from .rng import SeedLike, as_generator


@dataclass
class SegmentSystem:
    """Vertices joined by straight edges, all inside ``window``.

    ``generators`` optionally holds, per edge, the two seed indices whose
    bisector (Voronoi) or join (Delaunay) produced it.
    """

    vertices: np.ndarray
    edges: np.ndarray
    window: BoxWindow
    generators: np.ndarray | None = None
    lengths: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        a = self.vertices[self.edges[:, 0]]
        b = self.vertices[self.edges[:, 1]]
        self.lengths = np.linalg.norm(b - a, axis=1)

    @property
    def a(self) -> np.ndarray:
        return self.vertices[self.edges[:, 0]]

    @property
    def b(self) -> np.ndarray:
        return self.vertices[self.edges[:, 1]]

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    def __len__(self) -> int:
        return len(self.edges)

    def segments(self) -> list[Segment]:
        return [Segment(tuple(p), tuple(q)) for p, q in zip(self.a, self.b)]

    def shifted(self, v) -> "SegmentSystem":
        v = np.asarray(v, dtype=float)
        return SegmentSystem(self.vertices + v, self.edges.copy(), self.window.shifted(v), self.generators)

    def clipped(self, box: BoxWindow) -> "SegmentSystem":
        return _clip_graph(self.vertices, self.edges, box, self.generators)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(["x1", "y1", "x2", "y2", "length"])
            for (x1, y1), (x2, y2), ln in zip(self.a, self.b, self.lengths):
                out.writerow([repr(float(x1)), repr(float(y1)), repr(float(x2)), repr(float(y2)), repr(float(ln))])


def empty_system(window: BoxWindow) -> SegmentSystem:
    return SegmentSystem(np.zeros((0, 2)), np.zeros((0, 2), dtype=np.int64), window)


def _clip_graph(vertices, edges, box: BoxWindow, generators=None, tol: float = 1e-12) -> SegmentSystem:
    """Clip every edge to ``box``; endpoints cut by the boundary become new vertices.

    Edges that collapse to (near) zero length merge their endpoints.
    """
    vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        return empty_system(box)
    a, b = vertices[edges[:, 0]], vertices[edges[:, 1]]
    t0, t1, ok = clip_segments(a, b, box)
    edges, a, b, t0, t1 = edges[ok], a[ok], b[ok], t0[ok], t1[ok]
    gens = None if generators is None else np.asarray(generators)[ok]
    delta = b - a
    cut0 = t0 > 0
    cut1 = t1 < 1
    nv = len(vertices)
    n0, n1 = int(cut0.sum()), int(cut1.sum())
    new0 = a[cut0] + t0[cut0, None] * delta[cut0]
    new1 = a[cut1] + t1[cut1, None] * delta[cut1]
    # land exactly on the box so containment tests are exact
    new0 = np.clip(new0, box.lower, box.upper)
    new1 = np.clip(new1, box.lower, box.upper)
    verts = np.concatenate([vertices, new0, new1])
    e = edges.copy()
    e[cut0, 0] = nv + np.arange(n0)
    e[cut1, 1] = nv + n0 + np.arange(n1)

    # merge endpoints of degenerate edges (cocircular seeds give coincident vertices)
    lens = np.linalg.norm(verts[e[:, 1]] - verts[e[:, 0]], axis=1)
    scale = max(box.side, 1.0)
    short = lens <= tol * scale
    if short.any():
        labels = kernels.edge_labels(len(verts), e[short])
        e = labels[e]
        _, first = np.unique(labels, return_index=True)
        verts = verts[first]
        keep = ~short
        e = e[keep]
        if gens is not None:
            gens = gens[keep]
    used, inverse = np.unique(e.ravel(), return_inverse=True)
    return SegmentSystem(verts[used], inverse.reshape(-1, 2), box, gens)


def _check_planar(seeds) -> np.ndarray:
    seeds = np.asarray(seeds, dtype=float)
    if seeds.ndim != 2 or (len(seeds) and seeds.shape[1] != 2):
        raise UnsupportedDimensionError("tessellations are implemented in d = 2 only")
    return seeds


def _collinear(seeds: np.ndarray) -> bool:
    if len(seeds) < 3:
        return True
    centred = seeds - seeds.mean(axis=0)
    s = np.linalg.svd(centred, compute_uv=False)
    return bool(s[1] <= 1e-12 * max(s[0], 1e-300))


def _triangulate(seeds: np.ndarray) -> Delaunay:
    try:
        return Delaunay(seeds)
    except QhullError as exc:
        raise DegenerateInputError(f"triangulation failed: {exc}") from exc


def voronoi_segments(seeds, window: BoxWindow) -> SegmentSystem:
    """Cell boundaries of the Voronoi diagram of ``seeds``, clipped to ``window``."""
    seeds = _check_planar(seeds)
    if window.dim != 2:
        raise UnsupportedDimensionError("tessellations are implemented in d = 2 only")
    if len(seeds) < 2:
        raise DegenerateInputError("Voronoi edges need at least two seeds")
    far = window.side * 4 + float(np.abs(seeds - np.asarray(window.center)).max()) * 4
    if _collinear(seeds):
        return _collinear_voronoi(seeds, window, far)

    tri = _triangulate(seeds)
    simp, nbr = tri.simplices, tri.neighbors
    cc = circumcenters(seeds[simp])
    t_idx, k_idx = np.nonzero(nbr >= 0)
    other = nbr[t_idx, k_idx]
    inner = t_idx < other
    t_in, k_in, o_in = t_idx[inner], k_idx[inner], other[inner]
    gen_in = np.column_stack([simp[t_in, (k_in + 1) % 3], simp[t_in, (k_in + 2) % 3]])
    e_in = np.column_stack([t_in, o_in])

    # hull edges: rays from the circumcenter away from the opposite seed
    t_h, k_h = np.nonzero(nbr < 0)
    p = seeds[simp[t_h, (k_h + 1) % 3]]
    q = seeds[simp[t_h, (k_h + 2) % 3]]
    opp = seeds[simp[t_h, k_h]]
    direction = np.column_stack([q[:, 1] - p[:, 1], p[:, 0] - q[:, 0]])
    mid = 0.5 * (p + q)
    flip = ((mid - opp) * direction).sum(axis=1) < 0
    direction[flip] *= -1
    direction /= np.linalg.norm(direction, axis=1)[:, None]
    reach = far + np.linalg.norm(cc[t_h] - np.asarray(window.center), axis=1)
    ends = cc[t_h] + reach[:, None] * direction
    gen_h = np.column_stack([simp[t_h, (k_h + 1) % 3], simp[t_h, (k_h + 2) % 3]])
    e_h = np.column_stack([t_h, len(cc) + np.arange(len(t_h))])

    verts = np.concatenate([cc, ends])
    edges = np.concatenate([e_in, e_h])
    gens = np.concatenate([gen_in, gen_h])
    return _clip_graph(verts, edges, window, gens)


def _collinear_voronoi(seeds, window, far) -> SegmentSystem:
    """Parallel bisectors between consecutive seeds on a common line."""
    direction = seeds[-1] - seeds[0]
    if np.linalg.norm(direction) == 0:
        raise DegenerateInputError("coincident seeds")
    order = np.argsort(seeds @ direction, kind="stable")
    s = seeds[order]
    u = direction / np.linalg.norm(direction)
    normal = np.array([-u[1], u[0]])
    gaps = np.linalg.norm(np.diff(s, axis=0), axis=1)
    if (gaps == 0).any():
        raise DegenerateInputError("coincident seeds")
    mids = 0.5 * (s[:-1] + s[1:])
    reach = far + np.linalg.norm(mids - np.asarray(window.center), axis=1)
    a = mids - reach[:, None] * normal
    b = mids + reach[:, None] * normal
    m = len(mids)
    verts = np.concatenate([a, b])
    edges = np.column_stack([np.arange(m), m + np.arange(m)])
    gens = np.column_stack([order[:-1], order[1:]])
    return _clip_graph(verts, edges, window, gens)


def delaunay_triangles(seeds) -> np.ndarray:
    """Counter-clockwise Delaunay triangles as seed index triples."""
    seeds = _check_planar(seeds)
    if len(seeds) < 3 or _collinear(seeds):
        raise DegenerateInputError("Delaunay triangulation needs three non-collinear seeds")
    simp = _triangulate(seeds).simplices.copy()
    a, b, c = seeds[simp[:, 0]], seeds[simp[:, 1]], seeds[simp[:, 2]]
    cw = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]) < 0
    simp[cw] = simp[cw][:, [0, 2, 1]]
    return simp


def delaunay_segments(seeds, window: BoxWindow) -> SegmentSystem:
    """Delaunay edges of ``seeds`` clipped to ``window``."""
    if window.dim != 2:
        raise UnsupportedDimensionError("tessellations are implemented in d = 2 only")
    seeds = _check_planar(seeds)
    simp = delaunay_triangles(seeds)
    pairs = np.concatenate([simp[:, [0, 1]], simp[:, [1, 2]], simp[:, [2, 0]]])
    pairs = np.sort(pairs, axis=1)
    n = len(seeds)
    keys = np.unique(pairs[:, 0] * n + pairs[:, 1])
    pairs = np.column_stack([keys // n, keys % n])
    return _clip_graph(seeds, pairs, window, pairs.copy())


def lines_to_segments(angles, offsets, window: BoxWindow) -> SegmentSystem:
    """Lines ``{x : <x - c, (cos a, sin a)> = offset}`` cut at their mutual crossings.

    ``c`` is the window center.  Each piece between consecutive crossings (or
    the window boundary) is one edge.
    """
    if window.dim != 2:
        raise UnsupportedDimensionError("tessellations are implemented in d = 2 only")
    angles = np.asarray(angles, dtype=float).ravel()
    offsets = np.asarray(offsets, dtype=float).ravel()
    m = len(angles)
    if m == 0:
        return empty_system(window)
    c = np.asarray(window.center)
    normal = np.column_stack([np.cos(angles), np.sin(angles)])
    along = np.column_stack([-normal[:, 1], normal[:, 0]])
    base = c + offsets[:, None] * normal
    big = window.side * 2.0
    t0, t1, ok = clip_segments(base - big * along, base + big * along, window)
    # parameters along each line, measured from base in units of length
    lo = -big + 2 * big * t0
    hi = -big + 2 * big * t1

    verts = []
    edges = []
    nverts = 0
    idx = np.flatnonzero(ok)
    # pairwise crossings among the lines that hit the window
    if len(idx) > 1:
        ii, jj = np.triu_indices(len(idx), k=1)
        li, lj = idx[ii], idx[jj]
        det = along[li, 0] * (-along[lj, 1]) - along[li, 1] * (-along[lj, 0])
        usable = np.abs(det) > 1e-14
        li, lj, det = li[usable], lj[usable], det[usable]
        rhs = base[lj] - base[li]
        s = (rhs[:, 0] * (-along[lj, 1]) - rhs[:, 1] * (-along[lj, 0])) / det
        u = (along[li, 0] * rhs[:, 1] - along[li, 1] * rhs[:, 0]) / det
        inside = (s > lo[li]) & (s < hi[li]) & (u > lo[lj]) & (u < hi[lj])
        li, lj, s, u = li[inside], lj[inside], s[inside], u[inside]
        cross_pts = base[li] + s[:, None] * along[li]
    else:
        li = lj = np.zeros(0, dtype=np.int64)
        s = u = np.zeros(0)
        cross_pts = np.zeros((0, 2))
    ncross = len(cross_pts)
    verts.append(cross_pts)
    nverts = ncross
    # per line: its crossings (vertex id, parameter) plus the two clip ends
    line_of = np.concatenate([li, lj])
    param = np.concatenate([s, u])
    vid = np.concatenate([np.arange(ncross), np.arange(ncross)])
    for line in idx:
        sel = line_of == line
        ends = np.array([lo[line], hi[line]])
        end_pts = base[line] + ends[:, None] * along[line]
        end_pts = np.clip(end_pts, window.lower, window.upper)
        verts.append(end_pts)
        ids = np.concatenate([[nverts], vid[sel], [nverts + 1]])
        ps = np.concatenate([[ends[0]], param[sel], [ends[1]]])
        nverts += 2
        order = np.argsort(ps, kind="stable")
        ids = ids[order]
        edges.append(np.column_stack([ids[:-1], ids[1:]]))
    vertices = np.concatenate(verts) if verts else np.zeros((0, 2))
    edge_arr = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.int64)
    return _clip_graph(vertices, edge_arr, window)


def line_tessellation(line_intensity: float, window: BoxWindow, seed: SeedLike) -> SegmentSystem:
    """Poisson line tessellation seen in ``window``.

    Lines are ``(angle, offset)`` with angle uniform on ``[0, pi)`` and offset
    uniform on ``[-R, R]``, ``R`` the circumradius of the window; their number
    is Poisson with mean ``2 R line_intensity``.  With this parametrisation the
    edge length per unit area equals ``line_intensity``.
    """
    if window.dim != 2:
        raise UnsupportedDimensionError("tessellations are implemented in d = 2 only")
    rng = as_generator(seed)
    radius = window.side * math.sqrt(2) / 2
    n = rng.poisson(line_intensity * 2 * radius)
    angles = rng.uniform(0.0, math.pi, n)
    offsets = rng.uniform(-radius, radius, n)
    return lines_to_segments(angles, offsets, window)


# closed-form length intensities, used as defaults and as calibration checks
def voronoi_length_intensity(seed_intensity: float) -> float:
    return 2.0 * math.sqrt(seed_intensity)


def delaunay_length_intensity(seed_intensity: float) -> float:
    return 32.0 * math.sqrt(seed_intensity) / (3.0 * math.pi)
