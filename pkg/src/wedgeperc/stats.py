"""Small statistical helpers shared by the Monte Carlo harnesses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = ["TailFit", "survival_curve", "fit_log_linear_tail", "wilson_interval", "mean_ci"]


@dataclass(frozen=True)
class TailFit:
    """Least-squares fit of ``log P(X > t) = intercept - rate * t``."""

    rate: float
    intercept: float
    ci_low: float
    ci_high: float
    n_obs: int
    grid: np.ndarray
    survival: np.ndarray

    @property
    def ci_excludes_zero(self) -> bool:
        return bool(self.ci_low > 0 or self.ci_high < 0)


def survival_curve(values, grid) -> np.ndarray:
    v = np.sort(np.asarray(values, dtype=float))
    grid = np.asarray(grid, dtype=float)
    if v.size == 0:
        return np.zeros(grid.size)
    return (v.size - np.searchsorted(v, grid, side="right")) / v.size


def _fit(grid, surv):
    ok = surv > 0
    if ok.sum() < 2:
        return math.nan, math.nan
    slope, icpt = np.polyfit(grid[ok], np.log(surv[ok]), 1)
    return -slope, icpt


def fit_log_linear_tail(
    values,
    grid=None,
    min_count: int = 5,
    n_boot: int = 200,
    seed: int = 0,
    level: float = 0.95,
) -> TailFit:
    """
    Fit exponential decay of the empirical survival function.

    Only grid points with at least ``min_count`` exceedances enter the fit.
    The confidence interval is a percentile bootstrap over observations
    (seeded, so reproducible).
    """
    v = np.asarray(values, dtype=float)
    if grid is None:
        grid = np.arange(0, int(v.max()) + 1 if v.size else 1)
    grid = np.asarray(grid, dtype=float)
    surv = survival_curve(v, grid)
    keep = surv * v.size >= min_count
    g, s = grid[keep], surv[keep]
    rate, icpt = _fit(g, s)
    lo = hi = math.nan
    if not math.isnan(rate) and n_boot > 0:
        rng = np.random.default_rng(seed)
        reps = []
        for _ in range(n_boot):
            b = v[rng.integers(0, v.size, v.size)]
            r, _ = _fit(g, survival_curve(b, g))
            if not math.isnan(r):
                reps.append(r)
        if reps:
            a = (1 - level) / 2
            lo, hi = np.quantile(reps, [a, 1 - a])
    return TailFit(float(rate), float(icpt), float(lo), float(hi), int(v.size), g, s)


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    z = stats.norm.ppf(0.5 + level / 2)
    ph = k / n
    den = 1 + z * z / n
    c = (ph + z * z / (2 * n)) / den
    w = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, c - w), min(1.0, c + w)


def mean_ci(x, level: float = 0.95) -> tuple[float, float, float]:
    """Mean with a Student-t confidence interval (``nan`` ignored)."""
    x = np.asarray(x, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        return math.nan, math.nan, math.nan
    m = float(x.mean())
    if x.size < 2:
        return m, m, m
    h = stats.t.ppf(0.5 + level / 2, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size)
    return m, m - h, m + h
