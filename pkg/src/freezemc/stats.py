"""Distances, goodness-of-fit tests and rate fitting for the verification suites.

Multi-dimensional comparisons go through sliced Wasserstein (exact 1-D
distances averaged over seeded random directions) because exact multi-D
optimal transport is cubic in the sample size; whenever a test admits a 1-D
reduction the exact order-statistics distance is used instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import kolmogi, kolmogorov


def wasserstein1_1d(
    sample_a: np.ndarray,
    sample_b: np.ndarray | None = None,
    *,
    quantile_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    n_nodes: int = 4096,
) -> float:
    """W1 between two 1-D samples, or between a sample and an analytic law.

    Sample vs sample uses the exact CDF-difference integral over the merged
    support (for equal sizes this is the mean absolute difference of order
    statistics).  Against an analytic law, integrates |Q_emp - Q| over a
    midpoint quantile grid of n_nodes nodes.
    """
    a = np.sort(np.asarray(sample_a, dtype=float))
    if a.size == 0:
        raise ValueError("empty sample")
    if (sample_b is None) == (quantile_fn is None):
        raise ValueError("provide exactly one of sample_b or quantile_fn")
    if sample_b is not None:
        b = np.sort(np.asarray(sample_b, dtype=float))
        if b.size == 0:
            raise ValueError("empty sample")
        grid = np.concatenate([a, b])
        grid.sort(kind="mergesort")
        fa = np.searchsorted(a, grid[:-1], side="right") / a.size
        fb = np.searchsorted(b, grid[:-1], side="right") / b.size
        return float(np.sum(np.abs(fa - fb) * np.diff(grid)))
    u = (np.arange(n_nodes) + 0.5) / n_nodes
    q_emp = a[np.minimum((u * a.size).astype(np.int64), a.size - 1)]
    return float(np.mean(np.abs(q_emp - quantile_fn(u))))


def sliced_wasserstein(
    sample_a: np.ndarray,
    sample_b: np.ndarray,
    n_proj: int = 64,
    seed: int = 0,
) -> float:
    """Average W1 of 1-D projections onto seeded random unit directions."""
    a = np.atleast_2d(np.asarray(sample_a, dtype=float))
    b = np.atleast_2d(np.asarray(sample_b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(n_proj):
        u = rng.standard_normal(a.shape[1])
        u /= np.linalg.norm(u)
        total += wasserstein1_1d(a @ u, b @ u)
    return total / n_proj


@dataclass(frozen=True)
class KSResult:
    statistic: float
    n: int
    alpha: float
    critical_value: float
    p_value: float
    passed: bool
    inconclusive: bool


def ks_statistic(
    sample: np.ndarray,
    cdf: Callable[[np.ndarray], np.ndarray],
    alpha: float = 0.01,
) -> KSResult:
    """One-sample Kolmogorov-Smirnov test against an analytic CDF.

    Uses the asymptotic critical value kolmogi(alpha)/sqrt(n); samples with
    fewer than 5 points keep a well-defined statistic but are flagged
    inconclusive.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(x), dtype=float)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    stat = float(max(upper, lower))
    crit = float(kolmogi(alpha) / math.sqrt(n))
    p = float(kolmogorov(math.sqrt(n) * stat))
    return KSResult(
        statistic=stat,
        n=n,
        alpha=alpha,
        critical_value=crit,
        p_value=p,
        passed=stat <= crit,
        inconclusive=n < 5,
    )


@dataclass(frozen=True)
class MomentReport:
    mean_z: np.ndarray
    cov_z: np.ndarray
    max_abs_z: float
    passed: bool


def moment_report(
    samples: np.ndarray,
    mean: np.ndarray,
    cov: np.ndarray,
    z_max: float = 4.0,
) -> MomentReport:
    """Z-scores of empirical first and second moments against analytic ones.

    Mean entries use the CLT standard error sqrt(cov_kk / M); covariance
    entries use the Gaussian fourth-moment (Wick) standard error
    sqrt((cov_kk cov_ll + cov_kl^2) / M).  Exactly degenerate directions
    (zero analytic variance and zero observed deviation) score zero.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    m = x.shape[0]
    if m < 30:
        raise ValueError("need at least 30 samples for moment z-scores")
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    diag = np.diag(cov)
    se_mean = np.sqrt(np.clip(diag, 0.0, None) / m)
    diff_mean = x.mean(axis=0) - mean
    mean_z = _safe_z(diff_mean, se_mean)
    emp_cov = np.cov(x, rowvar=False, ddof=1)
    se_cov = np.sqrt((np.outer(diag, diag) + cov**2) / m)
    cov_z = _safe_z(emp_cov - cov, se_cov)
    max_abs = float(max(np.max(np.abs(mean_z)), np.max(np.abs(cov_z))))
    return MomentReport(mean_z=mean_z, cov_z=cov_z, max_abs_z=max_abs, passed=max_abs <= z_max)


def _safe_z(diff: np.ndarray, se: np.ndarray) -> np.ndarray:
    z = np.zeros_like(diff)
    ok = se > 0
    z[ok] = diff[ok] / se[ok]
    z[~ok & (np.abs(diff) > 1e-12)] = np.inf
    return z


@dataclass(frozen=True)
class RateFit:
    abscissae: np.ndarray
    log_distance: np.ndarray
    slope: float
    intercept: float
    r_squared: float


def rate_fit(xs: np.ndarray, distances: np.ndarray, kind: str = "poly") -> RateFit:
    """Least-squares slope of log distance against log n ("poly") or t ("exp").

    A polynomial rate C n^{-v} fits slope -v on log-log axes; an exponential
    rate C e^{-vt} fits slope -v against t.
    """
    xs = np.asarray(xs, dtype=float)
    d = np.asarray(distances, dtype=float)
    if xs.size != d.size or xs.size < 5:
        raise ValueError("need at least 5 aligned checkpoints")
    if np.any(d <= 0):
        raise ValueError("distances must be positive")
    if kind == "poly":
        absc = np.log(xs)
    elif kind == "exp":
        absc = xs
    else:
        raise ValueError(f"unknown kind {kind!r}")
    logd = np.log(d)
    slope, intercept = np.polyfit(absc, logd, 1)
    pred = slope * absc + intercept
    ss_res = float(np.sum((logd - pred) ** 2))
    ss_tot = float(np.sum((logd - logd.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(
        abscissae=absc,
        log_distance=logd,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
    )


@dataclass(frozen=True)
class SampleSet:
    """Draws with provenance, as emitted by the simulators."""

    data: np.ndarray  # (M, D)
    labels: np.ndarray | None = None
    seed: int | None = None
    config_hash: str | None = None

    def __post_init__(self):
        d = np.atleast_2d(self.data)
        if d.shape[0] < 2:
            raise ValueError("need at least 2 draws")
        if not np.all(np.isfinite(d)):
            raise ValueError("non-finite entries in sample set")
