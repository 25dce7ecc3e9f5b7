"""Geometric primitives: box windows, segments, clipping, a fixed-radius grid
index and robust planar predicates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ParameterError, RejectedInputError


@dataclass(frozen=True)
class BoxWindow:
    """The cube ``center + [-side/2, side/2]^d``."""

    center: tuple[float, ...]
    side: float

    def __post_init__(self):
        center = tuple(float(c) for c in np.atleast_1d(self.center))
        object.__setattr__(self, "center", center)
        if not (self.side > 0 and math.isfinite(self.side)):
            raise ParameterError(f"window side must be positive, got {self.side}")
        if not all(math.isfinite(c) for c in center):
            raise RejectedInputError("window center must be finite")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + self.side / 2

    @property
    def volume(self) -> float:
        return self.side**self.dim

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.abs(pts - np.asarray(self.center)).max(axis=1)
        return d <= self.side / 2 + tol

    def contains_box(self, other: "BoxWindow", tol: float = 1e-9) -> bool:
        return bool(
            np.all(other.lower >= self.lower - tol) and np.all(other.upper <= self.upper + tol)
        )

    def dilate(self, margin: float) -> "BoxWindow":
        return BoxWindow(self.center, self.side + 2 * margin)

    def shifted(self, v) -> "BoxWindow":
        return BoxWindow(tuple(np.asarray(self.center) + np.asarray(v, dtype=float)), self.side)

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lower + self.side * rng.random((n, self.dim))


def cube(side: float, center=None, dim: int = 2) -> BoxWindow:
    """``Q_side(center)``; the origin by default."""
    if center is None:
        center = (0.0,) * dim
    return BoxWindow(tuple(center), side)


@dataclass(frozen=True)
class Segment:
    a: tuple[float, ...]
    b: tuple[float, ...]
    length: float = field(default=float("nan"))

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        b = tuple(float(x) for x in self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        length = math.dist(a, b)
        if not length > 0:
            raise ParameterError("segment must have positive length")
        object.__setattr__(self, "length", length)


def clip_segments(a: np.ndarray, b: np.ndarray, box: BoxWindow, eps: float = 1e-12):
    """Liang-Barsky clipping of segments ``a[i] -> b[i]`` against ``box``.

    Returns parameters ``t0, t1`` and a mask of segments with a non-degenerate
    part inside; the clipped piece is ``a + t (b - a)`` for ``t0 <= t <= t1``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    delta = b - a
    lo, hi = box.lower, box.upper
    t0 = np.zeros(len(a))
    t1 = np.ones(len(a))
    ok = np.ones(len(a), dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(a.shape[1]):
            dk = delta[:, k]
            flat = np.abs(dk) < 1e-300
            outside = flat & ((a[:, k] < lo[k]) | (a[:, k] > hi[k]))
            ok &= ~outside
            ta = (lo[k] - a[:, k]) / dk
            tb = (hi[k] - a[:, k]) / dk
            tmin = np.where(flat, -np.inf, np.minimum(ta, tb))
            tmax = np.where(flat, np.inf, np.maximum(ta, tb))
            t0 = np.maximum(t0, tmin)
            t1 = np.minimum(t1, tmax)
    lengths = np.linalg.norm(delta, axis=1)
    ok &= (t1 - t0) * lengths > eps
    return t0, t1, ok


def clipped_lengths(a, b, box: BoxWindow) -> np.ndarray:
    t0, t1, ok = clip_segments(a, b, box)
    lengths = np.linalg.norm(np.asarray(b) - np.asarray(a), axis=1)
    return np.where(ok, (t1 - t0) * lengths, 0.0)


def ball_chords(a, b, center, radius: float):
    """Parameter interval of each segment inside the closed ball; returns ``t0, t1, ok``."""
    a = np.asarray(a, dtype=float)
    delta = np.asarray(b, dtype=float) - a
    f = a - np.asarray(center, dtype=float)
    qa = (delta * delta).sum(axis=1)
    qb = 2 * (f * delta).sum(axis=1)
    qc = (f * f).sum(axis=1) - radius * radius
    disc = qb * qb - 4 * qa * qc
    ok = (disc > 0) & (qa > 0)
    root = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s0 = (-qb - root) / (2 * qa)
        s1 = (-qb + root) / (2 * qa)
    t0 = np.clip(np.where(ok, s0, 0.0), 0.0, 1.0)
    t1 = np.clip(np.where(ok, s1, 0.0), 0.0, 1.0)
    ok &= t1 > t0
    return t0, t1, ok


def ball_lengths(a, b, center, radius: float) -> np.ndarray:
    t0, t1, ok = ball_chords(a, b, center, radius)
    lengths = np.linalg.norm(np.asarray(b) - np.asarray(a), axis=1)
    return np.where(ok, (t1 - t0) * lengths, 0.0)


def ball_volume(radius: float, dim: int) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * radius**dim


# -- fixed-radius neighbour index --------------------------------------------


@dataclass(frozen=True)
class GridIndex:
    """Points bucketed by ``floor(x / cell_size)``; immutable after construction."""

    cell_size: float
    points: np.ndarray
    buckets: dict

    @property
    def dim(self) -> int:
        return self.points.shape[1] if self.points.ndim == 2 else 0

    def cell_of(self, p) -> tuple[int, ...]:
        return tuple(int(c) for c in np.floor(np.asarray(p, dtype=float) / self.cell_size))


def _check_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, pts.shape[1] if pts.ndim == 2 else 2)
    if pts.ndim != 2:
        raise RejectedInputError("points must be an (n, d) array")
    if not np.isfinite(pts).all():
        raise RejectedInputError("non-finite coordinate in point set")
    return pts


def build_grid(points, cell_size: float) -> GridIndex:
    if not cell_size > 0:
        raise ParameterError("cell_size must be positive")
    pts = _check_points(points)
    buckets: dict[tuple[int, ...], list[int]] = {}
    cells = np.floor(pts / cell_size).astype(np.int64)
    for i, c in enumerate(map(tuple, cells.tolist())):
        buckets.setdefault(c, []).append(i)
    return GridIndex(float(cell_size), pts, buckets)


def neighbors_within(index: GridIndex, p, r: float) -> list[int]:
    """Indices ``q`` with ``|p - q| < r``, ascending.  Needs ``r <= cell_size``."""
    if not r > 0:
        raise ParameterError("query radius must be positive")
    if r > index.cell_size * (1 + 1e-12):
        raise ParameterError("query radius exceeds the grid cell size")
    p = np.asarray(p, dtype=float)
    if len(index.points) == 0:
        return []
    base = index.cell_of(p)
    found: list[int] = []
    for off in np.ndindex(*([3] * len(base))):
        cell = tuple(c + o - 1 for c, o in zip(base, off))
        found.extend(index.buckets.get(cell, ()))
    if not found:
        return []
    cand = np.asarray(found)
    d2 = ((index.points[cand] - p) ** 2).sum(axis=1)
    return sorted(cand[d2 < r * r].tolist())


# -- robust planar predicates --------------------------------------------------

_EPS = np.finfo(float).eps / 2
_CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS


def orient2d(a, b, c) -> int:
    """Sign of the signed area of triangle ``abc`` (+1 counter-clockwise)."""
    detl = (a[0] - c[0]) * (b[1] - c[1])
    detr = (a[1] - c[1]) * (b[0] - c[0])
    det = detl - detr
    if abs(det) > _CCW_BOUND * (abs(detl) + abs(detr)):
        return int(np.sign(det))
    fa, fb, fc = ([Fraction(x) for x in p[:2]] for p in (a, b, c))
    exact = (fa[0] - fc[0]) * (fb[1] - fc[1]) - (fa[1] - fc[1]) * (fb[0] - fc[0])
    return (exact > 0) - (exact < 0)


def incircle(a, b, c, d) -> int:
    """Positive iff ``d`` lies strictly inside the circle through ccw ``a, b, c``."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = (
        alift * (bdx * cdy - cdx * bdy)
        + blift * (cdx * ady - adx * cdy)
        + clift * (adx * bdy - bdx * ady)
    )
    permanent = (
        (abs(bdx * cdy) + abs(cdx * bdy)) * alift
        + (abs(cdx * ady) + abs(adx * cdy)) * blift
        + (abs(adx * bdy) + abs(bdx * ady)) * clift
    )
    if abs(det) > _ICC_BOUND * permanent:
        return int(np.sign(det))
    fa, fb, fc, fd = ([Fraction(x) for x in p[:2]] for p in (a, b, c, d))
    ax, ay = fa[0] - fd[0], fa[1] - fd[1]
    bx, by = fb[0] - fd[0], fb[1] - fd[1]
    cx, cy = fc[0] - fd[0], fc[1] - fd[1]
    exact = (
        (ax * ax + ay * ay) * (bx * cy - cx * by)
        + (bx * bx + by * by) * (cx * ay - ax * cy)
        + (cx * cx + cy * cy) * (ax * by - bx * ay)
    )
    return (exact > 0) - (exact < 0)


def circumcenters(tri: np.ndarray) -> np.ndarray:
    """Circumcenters of triangles given as an ``(m, 3, 2)`` array."""
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    bx, by = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    cx, cy = c[:, 0] - a[:, 0], c[:, 1] - a[:, 1]
    d = 2.0 * (bx * cy - by * cx)
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return np.column_stack([a[:, 0] + ux, a[:, 1] + uy])
