"""Monte Carlo estimators and experiment drivers.

Percolation curves use a thinning coupling: each replicate samples Cox points
at the largest intensity of a grid, attaches uniform retention marks and
records the critical intensity at which the origin first escapes.  Every grid
point is then a weighted proportion of the same replicates, so estimated
curves are exactly monotone in the intensity.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .cox import sample_cox, sample_poisson
from .errors import ParameterError, UndefinedEstimateError
from .estimates import EstimateWithCI, combined_se, proportion, sample_mean, weighted_ratio
from .geom import cube
from .measures import (
    DensityRealization,
    MeasureSpec,
    ModulatedBoolean,
    is_singular,
    sample_measure,
    spec_hash,
)
from .percolation import (
    edge_points,
    end_tolerances,
    escape_threshold,
    gap_open,
    origin_escapes,
    root_reaches,
    rooted_graph,
    singular_radius,
)
from .rng import substream

__all__ = [
    "EstimateWithCI",
    "ExperimentResult",
    "ResultRow",
    "estimate_theta",
    "estimate_theta_poisson",
    "theta_curve",
    "theta_curves",
    "replicate_pattern",
    "poisson_curve",
    "laplace_transform",
    "shot_noise_rate_closed_form",
    "isolation_lower_bound",
    "theta_with_isolation",
    "coupled_limit_large_radius",
    "coupled_limit_singular",
    "coupled_limit_ac",
    "sweep_lambda",
    "find_lambda_threshold",
    "k_convergence",
    "POISSON_CRITICAL_INTENSITY",
]

# critical intensity of planar Poisson continuum percolation, connection radius 1
POISSON_CRITICAL_INTENSITY = 1.43632

# -- replicate runner -----------------------------------------------------------------


def _run_chunk(args):
    func, task, idx = args
    return [func(task, i) for i in idx]


def run_replicates(func: Callable, task, replicates: int, workers: int = 1, chunk: int = 64) -> list:
    """``[func(task, i) for i in range(replicates)]``, optionally in worker processes.

    ``func`` must derive all randomness from ``task`` and ``i``; results come
    back in replicate order, so the output does not depend on ``workers``.
    """
    if replicates < 1:
        raise ParameterError("replicates must be >= 1")
    if workers <= 1 or replicates <= chunk:
        return [func(task, i) for i in range(replicates)]
    blocks = [range(s, min(s + chunk, replicates)) for s in range(0, replicates, chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_chunk, [(func, task, b) for b in blocks])
        return [x for part in parts for x in part]


def _rng(task, i: int) -> np.random.Generator:
    return np.random.default_rng(substream(task.seed, task.key, i))


# -- percolation curves -----------------------------------------------------------------


@dataclass(frozen=True)
class CurveTask:
    spec: MeasureSpec | None
    radii: tuple
    K: tuple
    lam_max: tuple
    seed: int
    key: str
    with_ball: bool = False


def _palm_environment(spec: MeasureSpec, side: float, rng):
    """Measure sampled on ``Q_side`` and re-centered at a size-biased point of ``Q_1``."""
    real = sample_measure(spec, cube(side, dim=spec.dim), rng)
    x, w = real.palm_draw(cube(1.0, dim=spec.dim), rng)
    if x is None:
        return None, 0.0
    return real.shifted(-x), w


def _critical(pts: np.ndarray, rng, r: float, K: float, lam_max: float) -> float:
    if lam_max <= 0:
        return math.inf
    pts = np.vstack([np.zeros((1, pts.shape[1])), pts])
    u = escape_threshold(pts, rng.random(len(pts)), r, K)
    return u * lam_max if math.isfinite(u) else math.inf


def _curve_replicate(task: CurveTask, i: int):
    """Returns ``(weight, critical intensity per radius..., ball mass per radius...)``.

    One Palm environment is shared by all radii; Cox points are drawn afresh
    for each radius at its own maximal intensity.
    """
    rng = _rng(task, i)
    m = len(task.radii)
    if task.spec is None:
        crit = [_critical(sample_poisson(lm, cube(K), rng).points, rng, r, K, lm)
                for r, K, lm in zip(task.radii, task.K, task.lam_max)]
        return (1.0, *crit, *([0.0] * m))
    dim = task.spec.dim
    side = max(task.K) + 1.0
    if task.with_ball:
        side = max(side, 2 * max(task.radii) + 1.0)
    moved, w = _palm_environment(task.spec, side, rng)
    if moved is None:
        return (0.0, *([math.inf] * m), *([0.0] * m))
    crit, balls = [], []
    for r, K, lm in zip(task.radii, task.K, task.lam_max):
        pts = sample_cox(moved, lm, rng, cube(K, dim=dim)).points if lm > 0 else np.zeros((0, dim))
        crit.append(_critical(pts, rng, r, K, lm))
        balls.append(moved.mass_of_ball(np.zeros(dim), r) if task.with_ball else 0.0)
    return (w, *crit, *balls)


@dataclass
class Curve:
    """Per-replicate Palm weights and critical intensities for one ``(spec, r, K)``."""

    weights: np.ndarray
    critical: np.ndarray
    lam_max: float
    seed: int
    ball_mass: np.ndarray | None = None
    weighted: bool = True

    def estimate(self, lam: float) -> EstimateWithCI:
        lam = float(lam)
        if lam > self.lam_max * (1 + 1e-12):
            raise ParameterError(f"intensity {lam} above the sampled maximum {self.lam_max}")
        y = (self.critical < lam).astype(float)
        if not self.weighted:
            return proportion(int(y.sum()), len(y), self.seed)
        return weighted_ratio(self.weights, y, self.seed, binary=True)

    def estimates(self, grid: Sequence[float]) -> list[EstimateWithCI]:
        return [self.estimate(x) for x in grid]


def _check_window(r: float, K: float) -> None:
    if not r > 0:
        raise ParameterError("connection radius must be positive")
    if not K > 4 * r:
        raise ParameterError(f"window K = {K} must exceed 4r = {4 * r}")


def theta_curves(
    spec: MeasureSpec | None,
    radii,
    lam_max,
    K,
    replicates: int,
    seed: int,
    *,
    workers: int = 1,
    with_ball: bool = False,
    key: str = "theta",
) -> list[Curve]:
    """Coupled Palm replicates giving ``theta_K(lam, r)`` for every ``lam <= lam_max``.

    ``radii``, ``lam_max`` and ``K`` are aligned sequences (scalars broadcast);
    one curve is returned per radius.  ``spec=None`` uses homogeneous Poisson
    points with unit weights.
    """
    radii = tuple(float(x) for x in np.atleast_1d(radii))
    lam_max = tuple(float(x) for x in np.broadcast_to(lam_max, len(radii)))
    K = tuple(float(x) for x in np.broadcast_to(K, len(radii)))
    for r, k, lm in zip(radii, K, lam_max):
        _check_window(r, k)
        if not lm >= 0:
            raise ParameterError("intensity must be non-negative")
    tag = "poisson" if spec is None else spec_hash(spec)
    label = f"{key}/{tag}/{radii!r}/{K!r}/{lam_max!r}"
    task = CurveTask(spec, radii, K, lam_max, int(seed), label, with_ball)
    out = np.asarray(run_replicates(_curve_replicate, task, replicates, workers), dtype=float)
    m = len(radii)
    return [
        Curve(out[:, 0], out[:, 1 + j], lam_max[j], int(seed), out[:, 1 + m + j], weighted=spec is not None)
        for j in range(m)
    ]


def replicate_pattern(spec: MeasureSpec, r: float, lam_max: float, K: float, seed: int, i: int):
    """Palm pattern (origin first) and weight of replicate ``i`` of a single-radius :func:`theta_curve`."""
    radii, lams, ks = (float(r),), (float(lam_max),), (float(K),)
    task = CurveTask(spec, radii, ks, lams, int(seed), f"theta/{spec_hash(spec)}/{radii!r}/{ks!r}/{lams!r}")
    rng = _rng(task, i)
    moved, w = _palm_environment(spec, float(K) + 1.0, rng)
    origin = np.zeros((1, spec.dim))
    if moved is None:
        return origin, 0.0, None
    pts = sample_cox(moved, lam_max, rng, cube(K, dim=spec.dim)).points
    return np.vstack([origin, pts]), w, moved


def theta_curve(spec: MeasureSpec, r: float, lam_max: float, K: float, replicates: int, seed: int, **kw) -> Curve:
    """Single-radius :func:`theta_curves`."""
    return theta_curves(spec, r, lam_max, K, replicates, seed, **kw)[0]


def poisson_curve(rho_max: float, K: float, replicates: int, seed: int, *, workers: int = 1, r: float = 1.0) -> Curve:
    """Coupled replicates of the origin plus homogeneous Poisson points in ``Q_K``."""
    return theta_curves(None, r, rho_max, K, replicates, seed, workers=workers, key="poisson")[0]


def estimate_theta(
    spec: MeasureSpec, lam: float, r: float, K: float, replicates: int, seed: int, *, workers: int = 1
) -> EstimateWithCI:
    """Palm-weighted estimate of ``P(o <-> boundary of Q_K)`` at intensity ``lam``."""
    return theta_curve(spec, r, lam, K, replicates, seed, workers=workers).estimate(lam)


def estimate_theta_poisson(rho: float, K: float, replicates: int, seed: int, *, workers: int = 1) -> EstimateWithCI:
    return poisson_curve(rho, K, replicates, seed, workers=workers).estimate(rho)


def k_convergence(spec, lam: float, r: float, K: float, replicates: int, seed: int, *, workers: int = 1):
    """Estimates at ``K`` and ``2K``; the flag is set if they differ by more than 3 SE."""
    a = estimate_theta(spec, lam, r, K, replicates, seed, workers=workers)
    b = estimate_theta(spec, lam, r, 2 * K, replicates, seed, workers=workers)
    return a, b, abs(a.mean - b.mean) > 3 * combined_se(a, b)


# -- Laplace transforms and isolation ---------------------------------------------------


@dataclass(frozen=True)
class LaplaceResult:
    transform: EstimateWithCI
    log_transform: EstimateWithCI
    rate: EstimateWithCI


@dataclass(frozen=True)
class _MassTask:
    spec: MeasureSpec
    r: float
    seed: int
    key: str


def _box_mass_replicate(task: _MassTask, i: int) -> float:
    box = cube(task.r, dim=task.spec.dim)
    return sample_measure(task.spec, box, _rng(task, i)).mass_of_box(box)


def box_masses(spec: MeasureSpec, r: float, replicates: int, seed: int, *, workers: int = 1) -> np.ndarray:
    """Independent samples of ``Lambda(Q_r)``."""
    task = _MassTask(spec, float(r), int(seed), f"mass/{spec_hash(spec)}/{r!r}")
    return np.asarray(run_replicates(_box_mass_replicate, task, replicates, workers))


def _laplace_from_masses(masses: np.ndarray, lam: float, r: float, dim: int, seed) -> LaplaceResult:
    vals = np.exp(-lam * masses)
    n = len(vals)
    mean = vals.mean()
    transform = sample_mean(vals, seed)
    if mean <= 0:
        raise UndefinedEstimateError("Laplace transform underflowed; use fewer or smaller boxes")
    # jackknife for the log and the rate
    loo = (vals.sum() - vals) / (n - 1)
    logs = np.log(loo)
    jk_se = math.sqrt((n - 1) / n * ((logs - logs.mean()) ** 2).sum())
    log_est = EstimateWithCI(float(math.log(mean)), jk_se, n, float(n), seed)
    scale = r**dim
    rate = EstimateWithCI(float(math.log(mean) / scale), jk_se / scale, n, float(n), seed)
    return LaplaceResult(transform, log_est, rate)


def laplace_transform(spec: MeasureSpec, lam, r: float, replicates: int, seed: int = 0, *, workers: int = 1):
    """``E[exp(-lam Lambda(Q_r))]`` with its log and the rate ``r^{-d} log E[...]``.

    ``lam`` may be a sequence, in which case one result per value is returned
    from the same measure replicates.
    """
    masses = box_masses(spec, r, replicates, seed, workers=workers)
    if np.ndim(lam) == 0:
        return _laplace_from_masses(masses, float(lam), r, spec.dim, seed)
    return [_laplace_from_masses(masses, float(x), r, spec.dim, seed) for x in lam]


def shot_noise_rate_closed_form(center_intensity: float, lam: float, kernel_integral: float) -> float:
    """``lambda_S (exp(-lam K) - 1)`` for a shot-noise field with kernel integral ``K``."""
    return center_intensity * math.expm1(-lam * kernel_integral)


def _isolation_from(ball_mass: np.ndarray, weights: np.ndarray, lam: float, seed) -> EstimateWithCI:
    return weighted_ratio(weights, np.exp(-lam * ball_mass), seed)


def isolation_lower_bound(spec: MeasureSpec, lam: float, r: float, replicates: int, seed: int = 0, *, workers: int = 1):
    """Palm-weighted ``E[exp(-lam Lambda*(B_r(o)))]``, a lower bound for ``1 - theta``."""
    # intensity 0 and the smallest admissible window: only the ball masses are used
    curve = theta_curve(spec, r, 0.0, 4 * r * (1 + 1e-9), replicates, seed, workers=workers, with_ball=True, key="iso")
    return _isolation_from(curve.ball_mass, curve.weights, lam, seed)


def theta_with_isolation(
    spec: MeasureSpec, radii, lam_grid, K: float, replicates: int, seed: int, *, workers: int = 1
):
    """Joint run on the ``radii x lam_grid`` grid from shared replicates.

    Returns ``{r: (theta estimates, isolation bounds)}``.
    """
    radii = [float(x) for x in np.atleast_1d(radii)]
    curves = theta_curves(spec, radii, max(lam_grid), K, replicates, seed, workers=workers, with_ball=True)
    return {
        r: (c.estimates(lam_grid), [_isolation_from(c.ball_mass, c.weights, x, seed) for x in lam_grid])
        for r, c in zip(radii, curves)
    }


# -- results ------------------------------------------------------------------------------

CSV_COLUMNS = ["spec", "lambda", "r", "K", "mean", "se", "n", "seed", "quantity"]


@dataclass
class ResultRow:
    spec: str
    lam: float
    r: float
    K: float
    quantity: str
    estimate: EstimateWithCI

    def as_csv(self) -> list[str]:
        e = self.estimate
        return [
            self.spec,
            repr(float(self.lam)),
            repr(float(self.r)),
            repr(float(self.K)),
            repr(float(e.mean)),
            repr(float(e.std_error)),
            str(int(e.replicates)),
            str(e.seed),
            self.quantity,
        ]


@dataclass
class ExperimentResult:
    kind: str
    rows: list[ResultRow] = field(default_factory=list)
    wall_clock: float = 0.0
    config_hash: str = ""
    extras: dict = field(default_factory=dict)

    def add(self, spec: str, lam, r, K, quantity: str, est: EstimateWithCI) -> None:
        self.rows.append(ResultRow(spec, float(lam), float(r), float(K), quantity, est))

    def select(self, quantity: str, spec: str | None = None) -> list[ResultRow]:
        return [x for x in self.rows if x.quantity == quantity and (spec is None or x.spec == spec)]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(CSV_COLUMNS)
        for row in self.rows:
            out.writerow(row.as_csv())
        return buf.getvalue()

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_text())


def _label(spec: MeasureSpec | None) -> str:
    return "poisson" if spec is None else spec.kind


# -- experiment drivers -----------------------------------------------------------------------


def sweep_lambda(
    spec: MeasureSpec, r, lam_grid, K: float, replicates: int, seed: int, *, workers: int = 1
) -> ExperimentResult:
    """``theta_K(lam, r)`` along intensity grids from coupled replicates.

    ``r`` may be a list of radii; ``lam_grid`` is then either one grid shared
    by all radii or a list of grids aligned with ``r``.
    """
    t0 = time.perf_counter()
    radii = [float(x) for x in np.atleast_1d(r)]
    if len(lam_grid) and np.ndim(lam_grid[0]) == 1:
        grids = [sorted(float(x) for x in g) for g in lam_grid]
    else:
        grids = [sorted(float(x) for x in lam_grid)] * len(radii)
    if len(grids) != len(radii) or any(not g for g in grids):
        raise ParameterError("need one nonempty intensity grid per radius")
    curves = theta_curves(spec, radii, [g[-1] for g in grids], K, replicates, seed, workers=workers)
    res = ExperimentResult("sweep")
    for rad, grid, curve in zip(radii, grids, curves):
        for lam, est in zip(grid, curve.estimates(grid)):
            res.add(spec.kind, lam, rad, K, "theta", est)
    res.wall_clock = time.perf_counter() - t0
    return res


@dataclass
class ThresholdResult:
    value: float
    lower: float
    upper: float
    flag: str = ""
    iterations: int = 0


def find_lambda_threshold(
    spec: MeasureSpec | None,
    r: float,
    target: float,
    K: float,
    replicates: int,
    seed: int,
    *,
    lam_lo: float,
    lam_hi: float,
    rel_width: float = 0.02,
    workers: int = 1,
) -> ThresholdResult:
    """Finite-window pseudo-critical intensity where the coupled curve crosses ``target``.

    ``spec=None`` uses homogeneous Poisson points (``lam`` is then the point
    density).  If the curve already exceeds ``target`` at ``lam_lo`` the lower
    edge is returned flagged ``"lower-edge"``; a target above the curve at
    ``lam_hi`` is an error.
    """
    if not 0 < target < 1:
        raise ParameterError("target must lie in (0, 1)")
    if not 0 < lam_lo < lam_hi:
        raise ParameterError("need 0 < lam_lo < lam_hi")
    if spec is None:
        curve = poisson_curve(lam_hi, K, replicates, seed, workers=workers, r=r)
    else:
        curve = theta_curve(spec, r, lam_hi, K, replicates, seed, workers=workers)
    f = lambda x: curve.estimate(x).mean  # noqa: E731
    if f(lam_lo) >= target:
        return ThresholdResult(lam_lo, lam_lo, lam_lo, "lower-edge")
    if f(lam_hi) < target:
        raise ParameterError(f"target {target} not reached at lam_hi = {lam_hi}; widen the bracket")
    lo, hi, it = lam_lo, lam_hi, 0
    while hi - lo > rel_width * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if f(mid) >= target:
            hi = mid
        else:
            lo = mid
        it += 1
    return ThresholdResult(0.5 * (lo + hi), lo, hi, "", it)


def coupled_limit_large_radius(
    spec: MeasureSpec,
    rho: float,
    r_list,
    K: float,
    replicates: int,
    seed: int,
    *,
    workers: int = 1,
    reference: EstimateWithCI | None = None,
) -> ExperimentResult:
    """``theta(rho / r^d, r)`` in ``Q_{K r}`` against the Poisson value at radius 1 in ``Q_K``."""
    t0 = time.perf_counter()
    res = ExperimentResult("limit-large-r")
    ref = reference or estimate_theta_poisson(rho, K, replicates, seed, workers=workers)
    res.add("poisson", rho, 1.0, K, "theta_poisson", ref)
    for r in r_list:
        lam = rho / r**spec.dim
        est = estimate_theta(spec, lam, r, K * r, replicates, seed, workers=workers)
        res.add(spec.kind, lam, r, K * r, "theta", est)
        dev = EstimateWithCI(abs(est.mean - ref.mean), combined_se(est, ref), replicates, est.effective_weight_sum, seed)
        res.add(spec.kind, lam, r, K * r, "deviation", dev)
    res.wall_clock = time.perf_counter() - t0
    return res


@dataclass(frozen=True)
class _SingularTask:
    spec: MeasureSpec
    c: float
    lams: tuple
    K: float
    seed: int
    key: str


def _euclidean_singular_radius(spec: MeasureSpec, lam: float, c: float) -> float:
    # points fall at lam * norm per unit length and bonds use c * norm per unit length
    return singular_radius(lam * spec.normalization, c * spec.normalization)


def _singular_replicate(task: _SingularTask, i: int):
    """Cox, gap-model and bond outcomes for one Palm tessellation, sharing randomness.

    Returns ``(weight, cox[...], gap[...], bond)`` with one entry per intensity.
    """
    rng = _rng(task, i)
    moved, w = _palm_environment(task.spec, task.K + 1.0, rng)
    n = len(task.lams)
    if moved is None:
        return (0.0,) + (0.0,) * (2 * n + 1)
    graph = rooted_graph(moved.system, task.K)
    norm = moved.normalization
    bond = root_reaches(graph, rng.random(len(graph.edges)) < np.exp(-task.c * norm * graph.lengths))
    cox, gap = [], []
    for lam in task.lams:
        r = _euclidean_singular_radius(task.spec, lam, task.c)
        owner, s = edge_points(graph.lengths, lam * norm, rng)
        a = graph.vertices[graph.edges[owner, 0]]
        b = graph.vertices[graph.edges[owner, 1]]
        frac = s / np.maximum(graph.lengths[owner], 1e-300)
        pts = np.vstack([np.zeros((1, 2)), a + frac[:, None] * (b - a)])
        cox.append(float(origin_escapes(pts, r, task.K)))
        gap.append(float(root_reaches(graph, gap_open(graph.lengths, owner, s, r, end_tolerances(graph, r)))))
    return (w, *cox, *gap, float(bond))


def coupled_limit_singular(
    spec: MeasureSpec,
    c: float,
    lam_list,
    K: float,
    replicates: int,
    seed: int,
    *,
    workers: int = 1,
) -> ExperimentResult:
    """Cox percolation at ``lam exp(-lam r) = c`` against bonds open with probability ``exp(-c |e|)``.

    All three models (Cox, gap model, bonds) share each replicate's Palm
    tessellation; the gap model is the intermediate step.  Intensities and
    ``|e|`` refer to the normalized measure, so the Euclidean radius solves
    ``lam exp(-lam * normalization * r) = c``.
    """
    if not is_singular(spec):
        raise ParameterError("the singular limit needs a tessellation measure")
    lams = tuple(float(x) for x in lam_list)
    for lam in lams:
        if spec.normalization <= 0:
            raise ParameterError("the singular limit needs a positive normalization")
        _check_window(_euclidean_singular_radius(spec, lam, c), K)
    t0 = time.perf_counter()
    task = _SingularTask(spec, float(c), lams, float(K), int(seed), f"singular/{spec_hash(spec)}/{c!r}/{K!r}/{lams!r}")
    out = np.asarray(run_replicates(_singular_replicate, task, replicates, workers), dtype=float)
    w = out[:, 0]
    n = len(lams)
    res = ExperimentResult("limit-singular")
    bond = weighted_ratio(w, out[:, 1 + 2 * n], seed, binary=True)
    res.add(spec.kind, 0.0, 0.0, K, "theta_bond", bond)
    for j, lam in enumerate(lams):
        r = _euclidean_singular_radius(spec, lam, c)
        cox = weighted_ratio(w, out[:, 1 + j], seed, binary=True)
        gap = weighted_ratio(w, out[:, 1 + n + j], seed, binary=True)
        res.add(spec.kind, lam, r, K, "theta", cox)
        res.add(spec.kind, lam, r, K, "theta_gap", gap)
        diff = out[:, 1 + j] - out[:, 1 + 2 * n]
        paired = weighted_ratio(w, diff, seed)
        res.add(spec.kind, lam, r, K, "theta_minus_bond", paired)
    res.extras["c"] = c
    res.wall_clock = time.perf_counter() - t0
    return res


# -- absolutely continuous limit --------------------------------------------------------------


@dataclass(frozen=True)
class _ACTask:
    spec: ModulatedBoolean
    level: float
    K: float
    seed: int
    key: str


def _superlevel_reach(real: DensityRealization, level: float, K: float) -> bool:
    """Whether the origin's cell connects to the boundary of ``Q_K`` within ``{density >= level}``."""
    h = real.pitch
    cells = int(math.ceil(K / h))
    start = np.floor((-K / 2 - real.anchor) / h).astype(np.int64)
    dens = real.cell_densities(start, (cells,) * real.dim)
    mask = dens >= level
    origin = tuple(np.floor((0.0 - real.anchor) / h).astype(np.int64) - start)
    if not mask[origin]:
        return False
    labels, _ = ndimage.label(mask, structure=np.ones((3,) * real.dim, dtype=int))
    lab = labels[origin]
    edge = np.zeros_like(mask)
    for k in range(real.dim):
        sl = [slice(None)] * real.dim
        sl[k] = 0
        edge[tuple(sl)] = True
        sl[k] = -1
        edge[tuple(sl)] = True
    return bool(np.any(labels[edge] == lab))


def _ac_replicate(task: _ACTask, i: int):
    rng = _rng(task, i)
    moved, w = _palm_environment(task.spec, task.K + 1.0, rng)
    if moved is None:
        return 0.0, 0.0, 0.0
    field = float(moved.density_at(np.zeros((1, task.spec.dim)))[0])
    reach = _superlevel_reach(moved, task.level, task.K)
    return w, field, float(reach)


def _check_ac(spec, rho: float) -> float:
    if not isinstance(spec, ModulatedBoolean):
        raise ParameterError("the absolutely continuous limit is run for modulated Boolean measures")
    if spec.inside < spec.outside:
        raise ParameterError("need inside >= outside (upper semicontinuous density)")
    if not rho > 0:
        raise ParameterError("rho must be positive")
    level = POISSON_CRITICAL_INTENSITY / rho
    values = (spec.normalization * spec.inside, spec.normalization * spec.outside)
    if any(math.isclose(level, v, rel_tol=1e-9) for v in values):
        raise ParameterError("critical level coincides with a density value; the limit is not covered")
    return level


def coupled_limit_ac(
    spec: ModulatedBoolean,
    rho: float,
    lam_list,
    K: float,
    replicates: int,
    seed: int,
    *,
    poisson_K: float = 8.0,
    workers: int = 1,
) -> ExperimentResult:
    """``theta(lam, (rho/lam)^{1/d})`` against ``E[theta_P(rho l*_o) 1{o connects in the superlevel set}]``.

    ``theta_P`` is the Poisson curve at radius 1, estimated once with coupled
    replicates; ``l*_o`` is the size-biased density at the origin.
    """
    level = _check_ac(spec, rho)
    t0 = time.perf_counter()
    res = ExperimentResult("limit-ac")
    task = _ACTask(spec, level, float(K), int(seed), f"ac/{spec_hash(spec)}/{rho!r}/{K!r}")
    out = np.asarray(run_replicates(_ac_replicate, task, replicates, workers), dtype=float)
    w, field_vals, reach = out[:, 0], out[:, 1], out[:, 2]
    top = rho * max(float(field_vals.max()), 1e-12)
    pcurve = poisson_curve(top, poisson_K, replicates, seed, workers=workers)
    crit = np.sort(pcurve.critical)
    theta_bar = np.searchsorted(crit, rho * field_vals, side="left") / len(crit)
    ref = weighted_ratio(w, theta_bar * reach, seed)
    ref = replace(ref, std_error=math.sqrt(ref.std_error**2 + 0.25 / len(crit)))
    res.add(spec.kind, 0.0, 0.0, K, "reference", ref)
    for lam in lam_list:
        r = (rho / lam) ** (1.0 / spec.dim)
        res.add(spec.kind, lam, r, K, "theta", estimate_theta(spec, lam, r, K, replicates, seed, workers=workers))
    res.extras["level"] = level
    res.wall_clock = time.perf_counter() - t0
    return res
