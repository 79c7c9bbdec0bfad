"""Monte Carlo estimates, Wilson intervals and power-law fits."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

Z95 = float(norm.ppf(0.975))


@dataclass(frozen=True)
class Estimate:
    """Probability estimate from ``hits`` successes in ``n`` trials."""

    hits: int
    n: int
    p_hat: float
    ci_lo: float
    ci_hi: float

    @property
    def sigma(self):
        """Binomial standard error (at least 1/n so that 0/n rows still have a scale)."""
        if self.n == 0:
            return math.inf
        return max(math.sqrt(self.p_hat * (1 - self.p_hat) / self.n), 1.0 / self.n)

    def as_row(self):
        return {"n": self.n, "p_hat": self.p_hat, "ci_lo": self.ci_lo, "ci_hi": self.ci_hi}


def wilson(hits, n, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    phat = hits / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if hits == 0 else max(0.0, centre - half)
    hi = 1.0 if hits == n else min(1.0, centre + half)
    return lo, hi


def estimate(hits, n):
    hits, n = int(hits), int(n)
    lo, hi = wilson(hits, n)
    return Estimate(hits, n, hits / n if n else math.nan, lo, hi)


def exact(value=1.0):
    """Degenerate estimate used for conventions (e.g. empty annulus)."""
    return Estimate(0, 0, float(value), float(value), float(value))


def mean_sem(x):
    """Sample mean and its standard error."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        return float(x.mean()) if x.size else math.nan, math.inf
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def decreasing_at(a: Estimate, b: Estimate, z=1.6449):
    """One-sided test that p(a) > p(b) at the given normal quantile (default 95%)."""
    diff = a.p_hat - b.p_hat
    se = math.sqrt(a.sigma ** 2 + b.sigma ** 2)
    return diff > z * se


def fit_power_law(ratios, probs, hits=None, ns=None, n_boot=1000, seed=0):
    """Slope of log p against log(ratio), with a parametric bootstrap CI.

    ``ratios`` are r/R.  Rows whose probability is 0 or 1 are dropped with a
    warning.  When ``hits``/``ns`` are given the bootstrap resamples binomial
    counts; otherwise the slope is deterministic and the CI collapses.
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    keep = (probs > 0) & (probs < 1)
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} rows with estimate 0 or 1")
    if keep.sum() < 2:
        raise ValueError("need at least two rows with estimates in (0, 1)")
    x = np.log(ratios[keep])
    y = np.log(probs[keep])
    slope = float(np.polyfit(x, y, 1)[0])
    if hits is None or ns is None:
        return slope, (slope, slope)
    ns = np.asarray(ns)[keep]
    ph = probs[keep]
    rs = np.random.default_rng(seed)
    boots = []
    for _ in range(n_boot):
        sample = rs.binomial(ns, ph) / ns
        if np.any(sample <= 0) or np.any(sample >= 1):
            continue
        boots.append(np.polyfit(x, np.log(sample), 1)[0])
    if not boots:
        return slope, (math.nan, math.nan)
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return slope, (float(lo), float(hi))
