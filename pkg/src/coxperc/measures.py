"""Random intensity measures: specifications, realizations, evaluation of
masses, size-biased (Palm) draws, normalization and stabilization/AEC
diagnostics."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import ClassVar, Union

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import (
    OutOfWindowError,
    ParameterError,
    UnsupportedDiagnosticError,
    UnsupportedDimensionError,
)
from .geom import BoxWindow, ball_chords, ball_volume, clip_segments, cube
from .rng import SeedLike, as_generator
from .tessellations import (
    DegenerateInputError,
    SegmentSystem,
    _clip_graph,
    delaunay_length_intensity,
    delaunay_segments,
    empty_system,
    line_tessellation,
    voronoi_length_intensity,
    voronoi_segments,
)

# -- specifications -------------------------------------------------------------


def _nonneg(name: str, value: float) -> None:
    if not (value >= 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be a finite non-negative number, got {value}")


def _positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be positive, got {value}")


def _dim_ok(dim: int, allowed=(2, 3)) -> None:
    if dim not in allowed:
        raise UnsupportedDimensionError(f"dimension {dim} not supported (allowed {allowed})")


@dataclass(frozen=True)
class ShotNoise:
    """Density ``sum_i kernel_height * 1{|x - X_i| <= kernel_radius}`` over Poisson centers."""

    kernel_radius: float
    kernel_height: float
    center_intensity: float
    normalization: float = 1.0
    dim: int = 2
    kind: ClassVar[str] = "shot_noise"

    def __post_init__(self):
        _positive("kernel_radius", self.kernel_radius)
        _nonneg("kernel_height", self.kernel_height)
        _nonneg("center_intensity", self.center_intensity)
        _nonneg("normalization", self.normalization)
        _dim_ok(self.dim)

    @property
    def kernel_integral(self) -> float:
        """Integral of the normalized kernel."""
        return self.normalization * self.kernel_height * ball_volume(self.kernel_radius, self.dim)


@dataclass(frozen=True)
class ModulatedBoolean:
    """Density ``inside`` on a Poisson-Boolean union of balls, ``outside`` off it."""

    grain_radius: float
    grain_intensity: float
    inside: float
    outside: float
    normalization: float = 1.0
    dim: int = 2
    kind: ClassVar[str] = "modulated_boolean"

    def __post_init__(self):
        _positive("grain_radius", self.grain_radius)
        _nonneg("grain_intensity", self.grain_intensity)
        _nonneg("inside", self.inside)
        _nonneg("outside", self.outside)
        _nonneg("normalization", self.normalization)
        _dim_ok(self.dim)

    @property
    def coverage(self) -> float:
        return 1.0 - math.exp(-self.grain_intensity * ball_volume(self.grain_radius, self.dim))


@dataclass(frozen=True)
class VoronoiEdges:
    seed_intensity: float
    normalization: float = 1.0
    dim: int = 2
    kind: ClassVar[str] = "voronoi"

    def __post_init__(self):
        _nonneg("seed_intensity", self.seed_intensity)
        _nonneg("normalization", self.normalization)
        _dim_ok(self.dim, (2,))


@dataclass(frozen=True)
class DelaunayEdges:
    seed_intensity: float
    normalization: float = 1.0
    dim: int = 2
    kind: ClassVar[str] = "delaunay"

    def __post_init__(self):
        _nonneg("seed_intensity", self.seed_intensity)
        _nonneg("normalization", self.normalization)
        _dim_ok(self.dim, (2,))


@dataclass(frozen=True)
class PoissonLines:
    line_intensity: float
    normalization: float = 1.0
    dim: int = 2
    kind: ClassVar[str] = "lines"

    def __post_init__(self):
        _nonneg("line_intensity", self.line_intensity)
        _nonneg("normalization", self.normalization)
        _dim_ok(self.dim, (2,))


@dataclass(frozen=True)
class ConstantLebesgue:
    density: float
    normalization: float = 1.0
    dim: int = 2
    kind: ClassVar[str] = "constant"

    def __post_init__(self):
        _nonneg("density", self.density)
        _nonneg("normalization", self.normalization)
        _dim_ok(self.dim, (1, 2, 3))


MeasureSpec = Union[ShotNoise, ModulatedBoolean, VoronoiEdges, DelaunayEdges, PoissonLines, ConstantLebesgue]

SPEC_TYPES: dict[str, type] = {
    cls.kind: cls
    for cls in (ShotNoise, ModulatedBoolean, VoronoiEdges, DelaunayEdges, PoissonLines, ConstantLebesgue)
}
SINGULAR = (VoronoiEdges, DelaunayEdges, PoissonLines)


def spec_to_dict(spec: MeasureSpec) -> dict:
    return {"kind": spec.kind, **asdict(spec)}


def spec_from_dict(data: dict) -> MeasureSpec:
    data = dict(data)
    kind = data.pop("kind")
    try:
        cls = SPEC_TYPES[kind]
    except KeyError:
        raise ParameterError(f"unknown measure kind {kind!r}") from None
    return cls(**data)


def spec_hash(spec: MeasureSpec, include_normalization: bool = True) -> str:
    data = spec_to_dict(spec)
    if not include_normalization:
        data.pop("normalization")
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def is_singular(spec: MeasureSpec) -> bool:
    return isinstance(spec, SINGULAR)


def default_margin(spec: MeasureSpec) -> float:
    if isinstance(spec, (VoronoiEdges, DelaunayEdges)):
        return 6.0 / math.sqrt(spec.seed_intensity) if spec.seed_intensity > 0 else 0.0
    if isinstance(spec, ShotNoise):
        return spec.kernel_radius
    if isinstance(spec, ModulatedBoolean):
        return spec.grain_radius
    return 0.0


def default_pitch(spec: MeasureSpec) -> float:
    if isinstance(spec, ShotNoise):
        return spec.kernel_radius / 8
    if isinstance(spec, ModulatedBoolean):
        return spec.grain_radius / 8
    return 1.0 / 32


# -- realizations -----------------------------------------------------------------


def _check_inside(window: BoxWindow, box: BoxWindow) -> None:
    if box.dim != window.dim:
        raise OutOfWindowError("box and window dimensions differ")
    if not window.contains_box(box):
        raise OutOfWindowError(f"box {box} exceeds realization window {window}")


@dataclass
class DensityRealization:
    """Absolutely continuous measure, evaluated on a lattice of pitch ``pitch``.

    The lattice is anchored at ``anchor``; a cell's density is the field value
    at its center.  ``sources`` are the shot-noise centers or Boolean grains.
    """

    spec: MeasureSpec
    window: BoxWindow
    pitch: float
    sources: np.ndarray
    anchor: np.ndarray
    seed: object = None
    margin: float = 0.0

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def _radius(self) -> float:
        if isinstance(self.spec, ShotNoise):
            return self.spec.kernel_radius
        if isinstance(self.spec, ModulatedBoolean):
            return self.spec.grain_radius
        return 0.0

    def shifted(self, v) -> "DensityRealization":
        v = np.asarray(v, dtype=float)
        return replace(
            self, window=self.window.shifted(v), sources=self.sources + v, anchor=self.anchor + v
        )

    def is_zero(self) -> bool:
        s = self.spec
        if s.normalization == 0:
            return True
        if isinstance(s, ConstantLebesgue):
            return s.density == 0
        if isinstance(s, ShotNoise):
            return s.kernel_height == 0 or len(self.sources) == 0
        return s.outside == 0 and (s.inside == 0 or len(self.sources) == 0)

    def _values(self, counts: np.ndarray) -> np.ndarray:
        s = self.spec
        if isinstance(s, ShotNoise):
            return s.normalization * s.kernel_height * counts
        if isinstance(s, ModulatedBoolean):
            return s.normalization * np.where(counts > 0, s.inside, s.outside)
        return np.full(counts.shape, s.normalization * s.density, dtype=float)

    def density_at(self, points) -> np.ndarray:
        """Exact field value at arbitrary points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if isinstance(self.spec, ConstantLebesgue) or len(self.sources) == 0:
            return self._values(np.zeros(len(pts)))
        tree = cKDTree(self.sources)
        counts = tree.query_ball_point(pts, self._radius, return_length=True)
        return self._values(np.asarray(counts, dtype=float))

    def cell_densities(self, start: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
        """Densities of lattice cells ``start + [0, shape)`` (integer indices)."""
        shape = tuple(int(x) for x in shape)
        if isinstance(self.spec, ConstantLebesgue) or len(self.sources) == 0:
            return self._values(np.zeros(shape))
        h, rad, d = self.pitch, self._radius, self.dim
        lo = self.anchor + start * h
        hi = lo + np.asarray(shape) * h
        near = np.all((self.sources > lo - rad) & (self.sources < hi + rad), axis=1)
        src = self.sources[near]
        if len(src) == 0:
            return self._values(np.zeros(shape))
        m = int(math.ceil(rad / h)) + 1
        offs = np.stack(np.meshgrid(*([np.arange(-m, m + 1)] * d), indexing="ij"), -1).reshape(-1, d)
        base = np.floor((src - self.anchor) / h).astype(np.int64)
        counts = np.zeros(int(np.prod(shape)))
        # chunk over sources to bound memory in 3d
        chunk = max(1, 2_000_000 // len(offs))
        for c0 in range(0, len(src), chunk):
            cand = base[c0 : c0 + chunk, None, :] + offs[None]
            centers = self.anchor + (cand + 0.5) * h
            hit = ((centers - src[c0 : c0 + chunk, None, :]) ** 2).sum(-1) <= rad * rad
            local = cand - start
            hit &= np.all((local >= 0) & (local < np.asarray(shape)), axis=-1)
            flat = np.ravel_multi_index(tuple(local[hit].T), shape)
            counts += np.bincount(flat, minlength=len(counts))
        return self._values(counts.reshape(shape))

    def _box_cells(self, box: BoxWindow):
        h = self.pitch
        rel_lo = (box.lower - self.anchor) / h
        rel_hi = (box.upper - self.anchor) / h
        start = np.floor(rel_lo + 1e-9).astype(np.int64)
        stop = np.ceil(rel_hi - 1e-9).astype(np.int64)
        stop = np.maximum(stop, start + 1)
        shape = tuple(stop - start)
        weights = None
        for k in range(self.dim):
            edges = self.anchor[k] + (start[k] + np.arange(shape[k] + 1)) * h
            overlap = np.clip(
                np.minimum(edges[1:], box.upper[k]) - np.maximum(edges[:-1], box.lower[k]), 0.0, h
            ) / h
            weights = overlap if weights is None else np.multiply.outer(weights, overlap)
        return start, shape, weights

    def mass_of_box(self, box: BoxWindow) -> float:
        _check_inside(self.window, box)
        if isinstance(self.spec, ConstantLebesgue):
            return self.spec.normalization * self.spec.density * box.volume
        start, shape, weights = self._box_cells(box)
        dens = self.cell_densities(start, shape)
        return float((dens * weights).sum() * self.pitch**self.dim)

    def mass_of_ball(self, center, radius: float) -> float:
        center = np.asarray(center, dtype=float)
        _check_inside(self.window, BoxWindow(tuple(center), 2 * radius))
        h = self.pitch
        start = np.floor((center - radius - self.anchor) / h).astype(np.int64)
        stop = np.ceil((center + radius - self.anchor) / h).astype(np.int64)
        shape = tuple(stop - start)
        dens = self.cell_densities(start, shape)
        axes = [self.anchor[k] + (start[k] + np.arange(shape[k]) + 0.5) * h for k in range(self.dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        dist2 = sum((g - c) ** 2 for g, c in zip(grids, center))
        return float(dens[dist2 <= radius * radius].sum() * h**self.dim)

    def palm_draw(self, unit_box: BoxWindow, rng: np.random.Generator):
        _check_inside(self.window, unit_box)
        if isinstance(self.spec, ConstantLebesgue):
            w = self.mass_of_box(unit_box)
            if w == 0:
                return None, 0.0
            return unit_box.uniform(rng, 1)[0], w
        start, shape, weights = self._box_cells(unit_box)
        masses = (self.cell_densities(start, shape) * weights).ravel() * self.pitch**self.dim
        total = float(masses.sum())
        if total <= 0:
            return None, 0.0
        cell = rng.choice(len(masses), p=masses / total)
        idx = np.array(np.unravel_index(cell, shape))
        lo = np.maximum(self.anchor + (start + idx) * self.pitch, unit_box.lower)
        hi = np.minimum(self.anchor + (start + idx + 1) * self.pitch, unit_box.upper)
        return lo + (hi - lo) * rng.random(self.dim), total


@dataclass
class SegmentRealization:
    """Edge-length measure of a segment system, times the spec's normalization."""

    spec: MeasureSpec
    window: BoxWindow
    system: SegmentSystem
    seed: object = None
    margin: float = 0.0

    @property
    def dim(self) -> int:
        return 2

    @property
    def normalization(self) -> float:
        return self.spec.normalization

    def shifted(self, v) -> "SegmentRealization":
        return replace(self, window=self.window.shifted(v), system=self.system.shifted(v))

    def is_zero(self) -> bool:
        return self.spec.normalization == 0 or len(self.system) == 0

    def mass_of_box(self, box: BoxWindow) -> float:
        _check_inside(self.window, box)
        if len(self.system) == 0:
            return 0.0
        t0, t1, ok = clip_segments(self.system.a, self.system.b, box)
        return float(self.normalization * ((t1 - t0) * self.system.lengths)[ok].sum())

    def mass_of_ball(self, center, radius: float) -> float:
        _check_inside(self.window, BoxWindow(tuple(np.asarray(center, float)), 2 * radius))
        if len(self.system) == 0:
            return 0.0
        t0, t1, ok = ball_chords(self.system.a, self.system.b, center, radius)
        return float(self.normalization * ((t1 - t0) * self.system.lengths)[ok].sum())

    def palm_draw(self, unit_box: BoxWindow, rng: np.random.Generator):
        _check_inside(self.window, unit_box)
        if len(self.system) == 0 or self.normalization == 0:
            return None, 0.0
        t0, t1, ok = clip_segments(self.system.a, self.system.b, unit_box)
        pieces = np.where(ok, (t1 - t0) * self.system.lengths, 0.0)
        total = float(pieces.sum())
        if total <= 0:
            return None, 0.0
        e = rng.choice(len(pieces), p=pieces / total)
        t = t0[e] + (t1[e] - t0[e]) * rng.random()
        a, b = self.system.a[e], self.system.b[e]
        return a + t * (b - a), total * self.normalization


MeasureRealization = Union[DensityRealization, SegmentRealization]


def measure_of_box(real: MeasureRealization, box: BoxWindow) -> float:
    return real.mass_of_box(box)


def measure_of_ball(real: MeasureRealization, center, radius: float) -> float:
    return real.mass_of_ball(center, radius)


def palm_draw(real: MeasureRealization, unit_box: BoxWindow, seed: SeedLike):
    """Draw ``x`` from the normalized restriction of the measure to ``unit_box``.

    Returns ``(x, w)`` with ``w`` the mass of ``unit_box``.  When the mass is
    zero the shift is ``None`` and the weight 0; callers skip such draws.
    """
    return real.palm_draw(unit_box, as_generator(seed))


# -- sampling -----------------------------------------------------------------------


def _poisson_points(rng, intensity: float, box: BoxWindow) -> np.ndarray:
    n = rng.poisson(intensity * box.volume)
    return box.uniform(rng, n)


def sample_measure(
    spec: MeasureSpec,
    window: BoxWindow,
    seed: SeedLike,
    *,
    margin: float | None = None,
    pitch: float | None = None,
) -> MeasureRealization:
    """Sample a realization of ``spec`` on ``window``.

    Centers, grains and tessellation seeds are drawn in the window dilated by
    ``margin`` so the realization near the boundary is not truncated.
    """
    if window.dim != spec.dim:
        raise UnsupportedDimensionError(f"window has dimension {window.dim}, spec {spec.dim}")
    rng = as_generator(seed)
    margin = default_margin(spec) if margin is None else float(margin)
    if isinstance(spec, (ShotNoise, ModulatedBoolean, ConstantLebesgue)):
        pitch = default_pitch(spec) if pitch is None else float(pitch)
        if isinstance(spec, ShotNoise):
            sources = _poisson_points(rng, spec.center_intensity, window.dilate(margin))
        elif isinstance(spec, ModulatedBoolean):
            sources = _poisson_points(rng, spec.grain_intensity, window.dilate(margin))
        else:
            sources = np.zeros((0, spec.dim))
        return DensityRealization(spec, window, pitch, sources, window.lower.copy(), seed, margin)

    if isinstance(spec, PoissonLines):
        system = line_tessellation(spec.line_intensity, window, rng)
        return SegmentRealization(spec, window, system, seed, 0.0)

    seeds = _poisson_points(rng, spec.seed_intensity, window.dilate(margin))
    try:
        if isinstance(spec, VoronoiEdges):
            system = voronoi_segments(seeds, window)
        else:
            system = delaunay_segments(seeds, window)
    except DegenerateInputError:
        system = empty_system(window)
        if isinstance(spec, DelaunayEdges) and len(seeds) == 2:
            system = _clip_graph(seeds, [[0, 1]], window)
    return SegmentRealization(spec, window, system, seed, margin)


# -- normalization ------------------------------------------------------------------


def exact_mean_mass(spec: MeasureSpec) -> float | None:
    """``E[Lambda(Q_1)]`` in closed form, or ``None`` if it must be calibrated."""
    if isinstance(spec, ConstantLebesgue):
        return spec.normalization * spec.density
    if isinstance(spec, ShotNoise):
        return spec.center_intensity * spec.kernel_integral
    if isinstance(spec, ModulatedBoolean):
        p = spec.coverage
        return spec.normalization * (p * spec.inside + (1 - p) * spec.outside)
    return None


def reference_length_intensity(spec: MeasureSpec) -> float | None:
    """Known length per unit area of the un-normalized tessellation."""
    if isinstance(spec, VoronoiEdges):
        return voronoi_length_intensity(spec.seed_intensity)
    if isinstance(spec, DelaunayEdges):
        return delaunay_length_intensity(spec.seed_intensity)
    if isinstance(spec, PoissonLines):
        return spec.line_intensity
    return None


def seed_intensity_for_length(kind: str, length_intensity: float) -> float:
    """Seed intensity giving a tessellation the requested length per unit area."""
    if kind == "voronoi":
        return (length_intensity / 2.0) ** 2
    if kind == "delaunay":
        return (length_intensity * 3.0 * math.pi / 32.0) ** 2
    if kind == "lines":
        return length_intensity
    raise ParameterError(f"no closed form for kind {kind!r}")


_MEMO: dict[str, dict] = {}


def calibration_constant(
    spec: MeasureSpec,
    replicates: int = 200,
    seed: int = 20170405,
    cache: str | Path | None = None,
) -> dict:
    """Monte Carlo length per unit area of a tessellation at unit normalization.

    Results are memoized and, if ``cache`` is given, persisted to a JSON
    sidecar keyed by the spec hash (normalization excluded).
    """
    if not is_singular(spec):
        raise ParameterError("calibration is only needed for tessellation measures")
    key = spec_hash(spec, include_normalization=False)
    store: dict = {}
    if cache is not None and Path(cache).exists():
        store = json.loads(Path(cache).read_text(encoding="utf-8"))
    entry = store.get(key) or _MEMO.get(key)
    if entry is None or entry.get("replicates", 0) < replicates:
        base = replace(spec, normalization=1.0)
        scale = base.line_intensity if isinstance(base, PoissonLines) else math.sqrt(base.seed_intensity)
        if scale <= 0:
            raise ParameterError("cannot calibrate a tessellation with zero intensity")
        side = 40.0 / scale if isinstance(base, PoissonLines) else 40.0 / scale
        box = cube(side)
        ss = np.random.SeedSequence(seed)
        vals = np.empty(replicates)
        for i, child in enumerate(ss.spawn(replicates)):
            real = sample_measure(base, box, child)
            vals[i] = real.system.total_length / box.volume
        entry = {
            "kind": spec.kind,
            "raw_intensity": float(vals.mean()),
            "std_error": float(vals.std(ddof=1) / math.sqrt(replicates)),
            "replicates": int(replicates),
            "seed": int(seed),
        }
    _MEMO[key] = entry
    if cache is not None:
        store[key] = entry
        Path(cache).parent.mkdir(parents=True, exist_ok=True)
        Path(cache).write_text(json.dumps(store, indent=2, sort_keys=True), encoding="utf-8")
    return entry


def calibrate(
    spec: MeasureSpec,
    target: float = 1.0,
    *,
    replicates: int = 200,
    seed: int = 20170405,
    cache: str | Path | None = None,
) -> MeasureSpec:
    """Return ``spec`` with the normalization that makes ``E[Lambda(Q_1)] = target``."""
    _nonneg("target", target)
    if is_singular(spec):
        raw = calibration_constant(spec, replicates, seed, cache)["raw_intensity"]
    else:
        raw = exact_mean_mass(replace(spec, normalization=1.0))
    if raw <= 0:
        if target == 0:
            return replace(spec, normalization=1.0)
        raise ParameterError("measure has zero mean; cannot normalize to a positive target")
    return replace(spec, normalization=target / raw)


# -- stabilization and AEC diagnostics ----------------------------------------------


@dataclass
class StabDiagnostics:
    n: float
    empirical_prob: float
    theory_bound: float
    replicates: int
    std_error: float = 0.0


def nearest_seed_sup(seeds, window: BoxWindow, resolution: int = 64) -> float:
    """Sup over a ``resolution``-pitch grid in ``window`` of the nearest-seed distance."""
    seeds = np.asarray(seeds, dtype=float).reshape(-1, window.dim)
    if len(seeds) == 0:
        return math.inf
    axes = [np.linspace(lo, hi, resolution + 1) for lo, hi in zip(window.lower, window.upper)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, window.dim)
    dist, _ = cKDTree(seeds).query(grid)
    return float(dist.max())


def _constant_radius(spec: MeasureSpec) -> float | None:
    if isinstance(spec, ConstantLebesgue):
        return 0.0
    if isinstance(spec, ShotNoise):
        return 2.0 * spec.kernel_radius
    if isinstance(spec, ModulatedBoolean):
        return 2.0 * spec.grain_radius
    return None


def stabilization_radius_sup(spec: MeasureSpec, window: BoxWindow, seed: SeedLike) -> float:
    """Sup of the stabilization radii over a grid of pitch ``side / 64`` in ``window``."""
    const = _constant_radius(spec)
    if const is not None:
        return const
    if isinstance(spec, PoissonLines):
        raise UnsupportedDiagnosticError("no stabilization radii are defined for line tessellations")
    rng = as_generator(seed)
    seeds = _poisson_points(rng, spec.seed_intensity, window.dilate(window.side + default_margin(spec)))
    return nearest_seed_sup(seeds, window)


def stabilization_bound(spec: MeasureSpec, n: float) -> float:
    """Upper bound on ``1 - P(sup_{Q_n} R < n)``."""
    const = _constant_radius(spec)
    if const is not None:
        return 0.0 if const < n else 1.0
    if isinstance(spec, (VoronoiEdges, DelaunayEdges)):
        d = spec.dim
        return min(1.0, d**d * math.exp(-spec.seed_intensity * (n / d) ** d))
    raise UnsupportedDiagnosticError("no stabilization radii are defined for line tessellations")


def stabilization_diagnostics(spec: MeasureSpec, n: float, replicates: int, seed: int) -> StabDiagnostics:
    _positive("n", n)
    hits = 0
    ss = np.random.SeedSequence(seed)
    for child in ss.spawn(replicates):
        if stabilization_radius_sup(spec, cube(n, dim=spec.dim), child) < n:
            hits += 1
    p = hits / replicates
    return StabDiagnostics(
        n=n,
        empirical_prob=p,
        theory_bound=stabilization_bound(spec, n),
        replicates=replicates,
        std_error=math.sqrt(max(p * (1 - p), 1.0 / replicates) / replicates),
    )


@dataclass(frozen=True)
class AECResult:
    support_nonempty: bool
    q_n_support_connected_in_q_2n: bool


def support_cells(real: MeasureRealization, box: BoxWindow, cells: int) -> np.ndarray:
    """Boolean raster of ``supp(Lambda)`` on a ``cells^d`` grid over ``box``."""
    pitch = box.side / cells
    if isinstance(real, SegmentRealization):
        mask = np.zeros((cells, cells), dtype=bool)
        sys = real.system
        if len(sys) == 0 or real.normalization == 0:
            return mask
        t0, t1, ok = clip_segments(sys.a, sys.b, box)
        a, b = sys.a[ok], sys.b[ok]
        t0, t1 = t0[ok], t1[ok]
        piece = (t1 - t0) * sys.lengths[ok]
        # consecutive samples at most pitch/2 apart: 8-adjacent cells at worst
        steps = np.ceil(piece / (pitch / 2)).astype(np.int64) + 1
        seg = np.repeat(np.arange(len(a)), steps)
        first = np.repeat(np.cumsum(steps) - steps, steps)
        frac = (np.arange(len(seg)) - first) / np.maximum(steps[seg] - 1, 1)
        t = t0[seg] + frac * (t1[seg] - t0[seg])
        pts = a[seg] + t[:, None] * (b[seg] - a[seg])
        idx = np.clip(np.floor((pts - box.lower) / pitch).astype(np.int64), 0, cells - 1)
        mask[idx[:, 0], idx[:, 1]] = True
        return mask
    axes = [lo + (np.arange(cells) + 0.5) * pitch for lo in box.lower]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, real.dim)
    return (real.density_at(grid) > 0).reshape((cells,) * real.dim)


def aec_check(real: MeasureRealization, n: float, resolution: int = 128) -> AECResult:
    """Discretized asymptotic-essential-connectedness check at scale ``n``.

    The support is rasterized on pitch ``n / resolution`` over ``Q_2n``; the
    check asks that the support inside ``Q_n`` is nonempty and lies in a
    single 8-connected component of the support in ``Q_2n``.
    """
    if real.dim != 2:
        raise UnsupportedDimensionError("AEC check is implemented in d = 2 only")
    outer = BoxWindow(real.window.center, 2 * n)
    _check_inside(real.window, outer)
    cells = 2 * resolution
    mask = support_cells(real, outer, cells)
    inner = mask[resolution // 2 : resolution // 2 + resolution, resolution // 2 : resolution // 2 + resolution]
    if not inner.any():
        return AECResult(False, False)
    labels, _ = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    inner_labels = labels[
        resolution // 2 : resolution // 2 + resolution, resolution // 2 : resolution // 2 + resolution
    ][inner]
    return AECResult(True, bool(np.all(inner_labels == inner_labels[0])))
