"""Poisson and Cox point patterns, Palm versions and the thinning coupling."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import ParameterError
from .geom import BoxWindow, ball_volume, cube
from .measures import (
    ConstantLebesgue,
    DensityRealization,
    MeasureRealization,
    MeasureSpec,
    SegmentRealization,
    ShotNoise,
    sample_measure,
)
from .rng import SeedLike, as_generator


@dataclass
class PointPattern:
    """Finite point configuration in ``window``.

    ``marks`` are optional uniform retention marks used by :func:`thin_to`.
    """

    points: np.ndarray
    window: BoxWindow
    intensity: float
    seed: object = None
    marks: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, self.window.dim)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.window.dim

    def to_csv(self, path) -> None:
        cols = ["x", "y", "z"][: self.dim]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(cols)
            for p in self.points:
                out.writerow([repr(float(c)) for c in p])


@dataclass
class PalmSample:
    pattern: PointPattern
    weight: float
    realization: MeasureRealization | None = field(default=None, repr=False)


def _nonneg_intensity(lam: float) -> float:
    lam = float(lam)
    if not lam >= 0:
        raise ParameterError(f"intensity must be non-negative, got {lam}")
    return lam


def sample_poisson(intensity: float, window: BoxWindow, seed: SeedLike) -> PointPattern:
    rho = _nonneg_intensity(intensity)
    rng = as_generator(seed)
    n = rng.poisson(rho * window.volume)
    return PointPattern(window.uniform(rng, n), window, rho, seed)


def _uniform_in_balls(rng, centers: np.ndarray, radius: float, counts: np.ndarray) -> np.ndarray:
    d = centers.shape[1]
    total = int(counts.sum())
    owner = np.repeat(np.arange(len(centers)), counts)
    direction = rng.standard_normal((total, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    rad = radius * rng.random(total) ** (1.0 / d)
    return centers[owner] + direction * rad[:, None], owner


def _cox_segments(real: SegmentRealization, lam: float, rng, region: BoxWindow) -> np.ndarray:
    sys = real.system
    if len(sys) == 0:
        return np.zeros((0, 2))
    counts = rng.poisson(lam * real.normalization * sys.lengths)
    owner = np.repeat(np.arange(len(sys)), counts)
    t = rng.random(len(owner))
    a, b = sys.a[owner], sys.b[owner]
    pts = a + t[:, None] * (b - a)
    return pts[region.contains(pts)] if len(pts) else pts


def _cox_density(real: DensityRealization, lam: float, rng, region: BoxWindow) -> np.ndarray:
    spec = real.spec
    d = real.dim
    if isinstance(spec, ConstantLebesgue):
        n = rng.poisson(lam * spec.normalization * spec.density * region.volume)
        return region.uniform(rng, n)
    src = real.sources
    rad = real._radius
    vol = ball_volume(rad, d)
    if isinstance(spec, ShotNoise):
        mass = lam * spec.normalization * spec.kernel_height * vol
        pts, _ = _uniform_in_balls(rng, src, rad, rng.poisson(mass, len(src)))
        return pts[region.contains(pts)] if len(pts) else pts.reshape(0, d)
    # Boolean: homogeneous base level plus the excess on (or off) the grain union
    lo_level = min(spec.inside, spec.outside) * spec.normalization
    excess = abs(spec.inside - spec.outside) * spec.normalization
    base = region.uniform(rng, rng.poisson(lam * lo_level * region.volume))
    if excess == 0:
        return base
    if spec.inside >= spec.outside:
        pts, owner = _uniform_in_balls(rng, src, rad, rng.poisson(lam * excess * vol, len(src)))
        if len(pts):
            keep = region.contains(pts)
            pts, owner = pts[keep], owner[keep]
        if len(pts):
            # keep a point only for the lowest-index grain covering it
            hits = cKDTree(src).query_ball_point(pts, rad)
            first = np.fromiter((min(h) for h in hits), dtype=np.int64, count=len(pts))
            pts = pts[first == owner]
        extra = pts
    else:
        cand = region.uniform(rng, rng.poisson(lam * excess * region.volume))
        if len(cand) and len(src):
            dist, _ = cKDTree(src).query(cand)
            cand = cand[dist > rad]
        extra = cand
    return np.vstack([base, extra.reshape(-1, d)])


def sample_cox(
    real: MeasureRealization, intensity: float, seed: SeedLike, region: BoxWindow | None = None
) -> PointPattern:
    """Cox points with intensity measure ``intensity * Lambda`` inside ``region``.

    ``region`` defaults to the realization window and must lie inside it.
    """
    lam = _nonneg_intensity(intensity)
    region = real.window if region is None else region
    if not real.window.contains_box(region):
        raise ParameterError("sampling region exceeds the realization window")
    rng = as_generator(seed)
    if lam == 0 or real.is_zero():
        pts = np.zeros((0, real.dim))
    elif isinstance(real, SegmentRealization):
        pts = _cox_segments(real, lam, rng, region)
    else:
        pts = _cox_density(real, lam, rng, region)
    return PointPattern(pts, region, lam, seed)


def sample_cox_palm(
    spec: MeasureSpec,
    intensity: float,
    window: BoxWindow,
    seed: SeedLike,
    *,
    realization: MeasureRealization | None = None,
    region: BoxWindow | None = None,
) -> PalmSample:
    """Palm version: the origin plus Cox points of the size-biased, re-centered measure.

    The measure is sampled on ``window`` (or taken from ``realization``), a
    point ``x`` is drawn from ``Lambda`` restricted to ``Q_1`` and the
    realization is shifted by ``-x``.  Cox points are drawn in ``region``
    (default: the largest origin-centered cube inside the shifted window).
    """
    lam = _nonneg_intensity(intensity)
    rng = as_generator(seed)
    real = realization if realization is not None else sample_measure(spec, window, rng)
    unit = cube(1.0, dim=real.dim)
    x, w = real.palm_draw(unit, rng)
    origin = np.zeros((1, real.dim))
    if x is None:
        return PalmSample(PointPattern(origin, region or unit, lam, seed), 0.0, real)
    moved = real.shifted(-x)
    if region is None:
        half = np.minimum(-moved.window.lower, moved.window.upper).min()
        region = cube(2 * half, dim=real.dim)
    pattern = sample_cox(moved, lam, rng, region)
    pts = np.vstack([origin, pattern.points])
    return PalmSample(PointPattern(pts, region, lam, seed), float(w), moved)


def retention_marks(n: int, seed: SeedLike) -> np.ndarray:
    return as_generator(seed).random(n)


def with_marks(pattern: PointPattern, seed: SeedLike) -> PointPattern:
    return replace(pattern, marks=retention_marks(len(pattern), seed))


def thin_to(pattern: PointPattern, target: float, seed: SeedLike = None, keep_first: bool = False) -> PointPattern:
    """Independent thinning of a pattern sampled at ``pattern.intensity``.

    A point is retained iff its mark is below ``target / intensity``; marks come
    from ``pattern.marks`` or, failing that, from ``seed``.  With shared marks
    the thinned sets are nested in ``target``.  ``keep_first`` always retains
    point 0 (the Palm origin).
    """
    lam_max = pattern.intensity
    target = _nonneg_intensity(target)
    if target > lam_max * (1 + 1e-12):
        raise ParameterError(f"target intensity {target} exceeds sampling intensity {lam_max}")
    marks = pattern.marks if pattern.marks is not None else retention_marks(len(pattern), seed)
    frac = target / lam_max if lam_max > 0 else 0.0
    keep = marks < frac
    if target >= lam_max:
        keep[:] = True
    if keep_first and len(keep):
        keep[0] = True
    return PointPattern(pattern.points[keep], pattern.window, target, pattern.seed, marks[keep])
