"""Gilbert graphs, boundary-reach events and bond percolation on segment systems."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .cox import PointPattern
from .errors import ContractViolation, ParameterError
from .estimates import EstimateWithCI, proportion
from .geom import cube
from .rng import SeedLike, as_generator
from .tessellations import SegmentSystem


@dataclass
class GilbertGraph:
    """Components of the graph joining points at distance ``< radius``.

    ``labels`` are consecutive component labels in order of first appearance;
    ``n_unions`` counts successful unions, so ``components + n_unions = n``.
    """

    pattern: PointPattern
    radius: float
    labels: np.ndarray
    n_unions: int

    @property
    def components(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def connected(self, i: int, j: int) -> bool:
        return bool(self.labels[i] == self.labels[j])

    def component_of(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.labels == self.labels[i])


def build_gilbert(pattern: PointPattern, r: float, impl=None) -> GilbertGraph:
    if not r > 0:
        raise ParameterError(f"connection radius must be positive, got {r}")
    labels, unions = kernels.gilbert_labels(pattern.points, r, impl)
    return GilbertGraph(pattern, float(r), np.asarray(labels), int(unions))


def _check_reach_args(points: np.ndarray, r: float, a: float) -> None:
    if len(points) == 0 or np.any(points[0] != 0):
        raise ContractViolation("point 0 must be the origin")
    if not a > 4 * r:
        raise ParameterError(f"window side a = {a} must exceed 4r = {4 * r}")


def origin_reaches_boundary(graph: GilbertGraph, a: float) -> bool:
    """Whether the origin's component leaves ``Q_{a - 2r}``."""
    pts = graph.pattern.points
    _check_reach_args(pts, graph.radius, a)
    half = (a - 2 * graph.radius) / 2
    member = graph.labels == graph.labels[0]
    return bool((np.abs(pts[member]).max(axis=1) >= half).any())


def in_window(points: np.ndarray, a: float) -> np.ndarray:
    """Points of ``points`` in ``Q_a``; keeps point 0 first."""
    return points[np.abs(points).max(axis=1) <= a / 2]


def origin_escapes(points, r: float, a: float, impl=None) -> bool:
    """Same event as :func:`origin_reaches_boundary`, by early-exit search.

    Points outside ``Q_a`` cannot change the event: the first point of an
    escaping path outside ``Q_{a-2r}`` lies within ``r`` of it.
    """
    pts = np.asarray(points, dtype=float)
    _check_reach_args(pts, r, a)
    return kernels.origin_reach(in_window(pts, a), r, (a - 2 * r) / 2, impl)


def escape_threshold(points, marks, r: float, a: float, impl=None) -> float:
    """Smallest retention mark at which the origin escapes ``Q_{a-2r}``.

    With points retained iff ``mark < u``, the origin escapes exactly when
    ``u`` exceeds the returned value (``inf`` if it never escapes).
    """
    pts = np.asarray(points, dtype=float)
    _check_reach_args(pts, r, a)
    keep = np.abs(pts).max(axis=1) <= a / 2
    return kernels.escape_threshold(pts[keep], np.asarray(marks)[keep], r, (a - 2 * r) / 2, impl)


# -- bond percolation on segment systems ------------------------------------------


@dataclass
class RootedGraph:
    """Segment system clipped to ``Q_K`` and rooted at the origin.

    If the origin lies on an edge that edge is split there and the origin
    becomes vertex ``root``; otherwise the root is the nearest vertex.
    ``on_edge`` records which case applied.
    """

    vertices: np.ndarray
    edges: np.ndarray
    lengths: np.ndarray
    root: int
    boundary: np.ndarray
    on_edge: bool
    side: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)


def rooted_graph(system: SegmentSystem, K: float, tol: float = 1e-9) -> RootedGraph:
    sys = system.clipped(cube(K))
    verts = sys.vertices
    edges = sys.edges
    on_edge = False
    if len(edges):
        a, b = sys.a, sys.b
        ab = b - a
        t = np.clip(-(a * ab).sum(1) / np.maximum((ab * ab).sum(1), 1e-300), 0.0, 1.0)
        dist = np.linalg.norm(a + t[:, None] * ab, axis=1)
        e = int(np.argmin(dist))
        if dist[e] < tol and tol < t[e] * sys.lengths[e] < sys.lengths[e] - tol:
            root = len(verts)
            verts = np.vstack([verts, np.zeros((1, 2))])
            i, j = edges[e]
            edges = np.vstack([np.delete(edges, e, axis=0), [[i, root], [root, j]]])
            on_edge = True
    if not on_edge:
        if len(verts) == 0:
            verts = np.zeros((1, 2))
            root = 0
        else:
            root = int(np.argmin(np.linalg.norm(verts, axis=1)))
    lengths = np.linalg.norm(verts[edges[:, 1]] - verts[edges[:, 0]], axis=1) if len(edges) else np.zeros(0)
    boundary = np.abs(verts).max(axis=1) >= K / 2 - tol
    return RootedGraph(verts, edges.reshape(-1, 2), lengths, root, boundary, on_edge, float(K))


def root_reaches(graph: RootedGraph, open_edges: np.ndarray, impl=None) -> bool:
    """Whether the root's open cluster contains a vertex on the boundary of ``Q_K``."""
    if graph.boundary[graph.root]:
        return True
    labels = kernels.edge_labels(graph.n_vertices, graph.edges[open_edges], impl)
    return bool(np.any(labels[graph.boundary] == labels[graph.root]))


@dataclass
class BondConfig:
    graph: RootedGraph
    open: np.ndarray
    b: float

    def __post_init__(self):
        if len(self.open) != len(self.graph.edges):
            raise ParameterError("open flags must match the edge count")


def sample_bonds(graph: RootedGraph, b: float, seed: SeedLike) -> BondConfig:
    """Each edge open independently with probability ``b ** length``."""
    if not 0 < b <= 1:
        raise ParameterError(f"b must lie in (0, 1], got {b}")
    u = as_generator(seed).random(len(graph.edges))
    return BondConfig(graph, u < b**graph.lengths, b)


def bond_percolation_theta(system: SegmentSystem, b: float, K: float, replicates: int, seed: int):
    """Probability that the root's cluster reaches the boundary of ``Q_K``.

    An empty system gives estimate 0 flagged ``"empty-system"``.
    """
    graph = rooted_graph(system, K)
    if len(graph.edges) == 0:
        return EstimateWithCI(0.0, 0.0, replicates, float(replicates), seed, ("empty-system",))
    hits = 0
    for child in np.random.SeedSequence(seed).spawn(replicates):
        hits += root_reaches(graph, sample_bonds(graph, b, child).open)
    return proportion(hits, replicates, seed)


# -- gap model ------------------------------------------------------------------------


def edge_points(lengths: np.ndarray, lam: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Poisson points on each edge: returns owner edge and distance from its first end, sorted."""
    counts = rng.poisson(lam * lengths)
    owner = np.repeat(np.arange(len(lengths)), counts)
    s = rng.random(len(owner)) * lengths[owner]
    order = np.lexsort((s, owner))
    return owner[order], s[order]


def gap_open(
    lengths: np.ndarray,
    owner: np.ndarray,
    s: np.ndarray,
    r: float,
    end_tol: tuple[np.ndarray, np.ndarray],
) -> np.ndarray:
    """Edges whose Poisson points leave no gap ``>= r`` inside and end gaps below ``end_tol``.

    ``end_tol`` gives per-edge tolerances at the first and second end.  An
    edge without points is open iff its length is below both tolerances.
    """
    m = len(lengths)
    tol_a, tol_b = end_tol
    counts = np.bincount(owner, minlength=m)
    ok = np.ones(m, dtype=bool)
    if len(s):
        same = owner[1:] == owner[:-1]
        bad = same & (np.diff(s) >= r)
        ok[owner[1:][bad]] = False
        first = np.ones(len(s), dtype=bool)
        first[1:] = ~same
        last = np.ones(len(s), dtype=bool)
        last[:-1] = ~same
        ok[owner[first][s[first] >= tol_a[owner[first]]]] = False
        ok[owner[last][(lengths[owner[last]] - s[last]) >= tol_b[owner[last]]]] = False
    empty = counts == 0
    ok[empty] = lengths[empty] < np.minimum(tol_a[empty], tol_b[empty])
    return ok


def end_tolerances(graph: RootedGraph, r: float, vertex_rule: str = "half") -> tuple[np.ndarray, np.ndarray]:
    """Per-edge end tolerances.

    ``"half"``: interior tessellation vertices need a point within ``r/2`` so
    open edges sharing a vertex connect; the root (a point itself) and
    boundary vertices use ``r``.  ``"point"``: every end is treated as a
    point, tolerance ``r``.
    """
    if vertex_rule == "point":
        tol = np.full(graph.n_vertices, r)
    elif vertex_rule == "half":
        tol = np.full(graph.n_vertices, r / 2)
        tol[graph.boundary] = r
        if graph.on_edge:
            tol[graph.root] = r
    else:
        raise ParameterError(f"unknown vertex rule {vertex_rule!r}")
    return tol[graph.edges[:, 0]], tol[graph.edges[:, 1]]


@dataclass
class GapResult:
    estimate: EstimateWithCI
    edge_lengths: np.ndarray
    survival: np.ndarray
    survival_point_rule: np.ndarray
    replicates: int = 0
    empty: bool = False


def gap_model_theta(system: SegmentSystem, lam: float, r: float, K: float, replicates: int, seed: int) -> GapResult:
    """Edge kept iff its Poisson(``lam`` per length) points leave no gap of ``r`` or more.

    Returns the reach estimate plus per-edge survival frequencies under the
    connecting rule (``"half"``) and with ends treated as points (``"point"``).
    """
    if not (lam >= 0 and r > 0):
        raise ParameterError("need lam >= 0 and r > 0")
    graph = rooted_graph(system, K)
    m = len(graph.edges)
    surv = np.zeros(m)
    surv_pt = np.zeros(m)
    if m == 0:
        est = EstimateWithCI(0.0, 0.0, replicates, float(replicates), seed, ("empty-system",))
        return GapResult(est, graph.lengths, surv, surv_pt, replicates, True)
    tol_half = end_tolerances(graph, r, "half")
    tol_point = end_tolerances(graph, r, "point")
    hits = 0
    for child in np.random.SeedSequence(seed).spawn(replicates):
        owner, s = edge_points(graph.lengths, lam, np.random.default_rng(child))
        op = gap_open(graph.lengths, owner, s, r, tol_half)
        surv += op
        surv_pt += gap_open(graph.lengths, owner, s, r, tol_point)
        hits += root_reaches(graph, op)
    return GapResult(proportion(hits, replicates, seed), graph.lengths, surv / replicates, surv_pt / replicates, replicates)


def survival_bracket(length, lam: float, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Bounds ``(1 - e^{-lam r})^{lam |e| +- lam^{3/4}}`` on the survival of an edge."""
    length = np.asarray(length, dtype=float)
    base = -math.expm1(-lam * r)
    lo = base ** (lam * length + lam**0.75)
    hi = base ** np.maximum(lam * length - lam**0.75, 0.0)
    return lo, np.minimum(hi, 1.0)


def singular_radius(lam: float, c: float) -> float:
    """Radius solving ``lam * exp(-lam r) = c`` (requires ``lam > c``)."""
    if not (c > 0 and lam > c):
        raise ParameterError(f"no radius solves lam exp(-lam r) = c for lam = {lam}, c = {c}")
    return math.log(lam / c) / lam
