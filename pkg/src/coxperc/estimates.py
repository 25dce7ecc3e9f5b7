"""Monte Carlo estimates with standard errors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedEstimateError


@dataclass(frozen=True)
class EstimateWithCI:
    """Point estimate with standard error and provenance.

    ``effective_weight_sum`` is the sum of Palm weights (the replicate count
    for unweighted estimates).  ``flags`` carries non-fatal diagnostics.
    """

    mean: float
    std_error: float
    replicates: int
    effective_weight_sum: float
    seed: int | None = None
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.std_error < 0 or not self.replicates >= 1:
            raise ValueError("std_error must be >= 0 and replicates >= 1")

    def interval(self, z: float = 3.0) -> tuple[float, float]:
        return self.mean - z * self.std_error, self.mean + z * self.std_error


def combined_se(*estimates: EstimateWithCI) -> float:
    return math.sqrt(sum(e.std_error**2 for e in estimates))


def agree(a: EstimateWithCI, b: EstimateWithCI, z: float = 3.0) -> bool:
    return abs(a.mean - b.mean) <= z * combined_se(a, b)


def proportion(hits: int, n: int, seed=None, flags=()) -> EstimateWithCI:
    """Sample proportion with an Agresti-Coull standard error (never zero)."""
    if n < 1:
        raise UndefinedEstimateError("no replicates")
    q = (hits + 2) / (n + 4)
    return EstimateWithCI(hits / n, math.sqrt(q * (1 - q) / (n + 4)), n, float(n), seed, tuple(flags))


def sample_mean(values, seed=None) -> EstimateWithCI:
    v = np.asarray(values, dtype=float)
    if len(v) < 1:
        raise UndefinedEstimateError("no replicates")
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return EstimateWithCI(float(v.mean()), se, len(v), float(len(v)), seed)


def weighted_ratio(weights, values, seed=None, binary: bool = False) -> EstimateWithCI:
    """Self-normalized estimate ``sum w y / sum w`` with delta-method standard error.

    With ``binary`` the error is floored by the Agresti-Coull error at the
    effective sample size ``(sum w)^2 / sum w^2``, so all-0 or all-1 samples
    keep a positive error.
    """
    w = np.asarray(weights, dtype=float)
    y = np.asarray(values, dtype=float)
    total = w.sum()
    if not total > 0:
        raise UndefinedEstimateError("all Palm weights are zero")
    ratio = float((w * y).sum() / total)
    se = float(np.sqrt((w**2 * (y - ratio) ** 2).sum()) / total)
    if binary:
        n_eff = total**2 / (w**2).sum()
        q = (ratio * n_eff + 2) / (n_eff + 4)
        se = max(se, math.sqrt(q * (1 - q) / (n_eff + 4)))
    return EstimateWithCI(ratio, se, len(w), float(total), seed)
