"""
Hypothesis tests and density estimates used by the experiment harness.

Normality is checked with a one-sample Kolmogorov-Smirnov statistic against a
normal fitted by sample mean and standard deviation.  Because the parameters
are estimated, the plain Kolmogorov distribution overstates p-values badly
(the nominal 5% test rejects almost never), so the decision p-value comes from
the Lilliefors null: the distribution of the same statistic under normal data
with estimated parameters, simulated once per sample size with a fixed seed.
The asymptotic Kolmogorov p-value is still reported alongside it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

ALPHA = 0.05
LILLIEFORS_REPS = 20000
LILLIEFORS_SEED = 20220401


class DegenerateSampleError(ValueError):
    pass


@dataclass(frozen=True)
class TestReport:
    statistic: float
    p_value: float
    alpha: float = ALPHA
    p_asymptotic: Optional[float] = None

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha


def normal_sf(z: float) -> float:
    """Upper-tail standard normal probability, accurate far into the tail."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _clean(samples: Sequence[float], min_n: int) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < min_n:
        raise DegenerateSampleError(f"need at least {min_n} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DegenerateSampleError("samples must be finite")
    return x


def ks_statistic(samples: Sequence[float]) -> float:
    """sup |F_emp - Phi((x - mean) / sd)| with sample mean and sd (ddof=1)."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    sd = x.std(ddof=1)
    if not sd > 0:
        raise DegenerateSampleError("zero-variance sample")
    cdf = ndtr((x - x.mean()) / sd)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def kolmogorov_sf(lam: float, terms: int = 100) -> float:
    """P(K > lam) for the limiting Kolmogorov distribution."""
    if lam <= 0.0:
        return 1.0
    if lam < 0.2:
        # series converges too slowly here and the true value is 1 to double precision
        return 1.0
    total = 0.0
    for j in range(1, terms + 1):
        term = math.exp(-2.0 * j * j * lam * lam)
        total += term if j % 2 == 1 else -term
        if term < 1e-17:
            break
    return min(1.0, max(0.0, 2.0 * total))


def ks_asymptotic_p(d: float, n: int) -> float:
    sqn = math.sqrt(n)
    return kolmogorov_sf((sqn + 0.12 + 0.11 / sqn) * d)


@lru_cache(maxsize=64)
def _lilliefors_null(n: int, reps: int = LILLIEFORS_REPS) -> np.ndarray:
    rng = np.random.default_rng([LILLIEFORS_SEED, n])
    x = np.sort(rng.standard_normal((reps, n)), axis=1)
    mean = x.mean(axis=1, keepdims=True)
    sd = x.std(axis=1, ddof=1, keepdims=True)
    cdf = ndtr((x - mean) / sd)
    i = np.arange(1, n + 1)
    d = np.maximum((i / n - cdf).max(axis=1), (cdf - (i - 1) / n).max(axis=1))
    return np.sort(d)


def lilliefors_p(d: float, n: int) -> float:
    null = _lilliefors_null(n)
    exceed = null.size - np.searchsorted(null, d, side="left")
    return float((exceed + 1) / (null.size + 1))


def ks_normal_test(samples: Sequence[float], alpha: float = ALPHA) -> TestReport:
    x = _clean(samples, 8)
    d = ks_statistic(x)
    return TestReport(d, lilliefors_p(d, x.size), alpha, ks_asymptotic_p(d, x.size))


def _warn_small(n: int) -> None:
    if n < 30:
        warnings.warn(f"Z-test on only {n} samples; the normal approximation is rough", stacklevel=3)


def z_test_greater(a: Sequence[float], b: Sequence[float], alpha: float = ALPHA) -> TestReport:
    """One-sided test of H0: E[a] <= E[b] with unpooled variances."""
    xa, xb = _clean(a, 2), _clean(b, 2)
    _warn_small(min(xa.size, xb.size))
    se2 = xa.var(ddof=1) / xa.size + xb.var(ddof=1) / xb.size
    if not se2 > 0:
        raise DegenerateSampleError("both samples have zero variance")
    z = (xa.mean() - xb.mean()) / math.sqrt(se2)
    return TestReport(float(z), normal_sf(z), alpha)


def z_test_positive_mean(d: Sequence[float], alpha: float = ALPHA) -> TestReport:
    """One-sided test of H0: E[d] <= 0."""
    x = _clean(d, 2)
    _warn_small(x.size)
    sd = x.std(ddof=1)
    if not sd > 0:
        raise DegenerateSampleError("zero-variance sample")
    z = x.mean() / (sd / math.sqrt(x.size))
    return TestReport(float(z), normal_sf(z), alpha)


def z_from_summary(mean: float, sd: float, n: int) -> TestReport:
    """Positive-mean Z-test from summary statistics alone."""
    if not sd > 0 or n < 2:
        raise DegenerateSampleError("need sd > 0 and n >= 2")
    z = mean / (sd / math.sqrt(n))
    return TestReport(z, normal_sf(z))


def silverman_bandwidth(x: np.ndarray) -> float:
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    iqr = q75 - q25
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * x.size ** (-0.2)


def kde_points(samples: Sequence[float], n_points: int = 200) -> list[tuple[float, float]]:
    x = _clean(samples, 2)
    if not x.std() > 0:
        raise DegenerateSampleError("zero-variance sample")
    h = silverman_bandwidth(x)
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, n_points)
    u = (grid[:, None] - x[None, :]) / h
    dens = np.exp(-0.5 * u * u).sum(axis=1) / (x.size * h * math.sqrt(2 * math.pi))
    return [(float(g), float(f)) for g, f in zip(grid, dens)]
