"""Shortest covering intervals of weighted step distributions.

The modal interval at level alpha is the narrowest interval holding at
least mass alpha.  Candidate endpoints are the support points themselves;
interval mass is counted on the closed interval, so the left endpoint's
atom is included.  Ties in width are broken toward the smallest left
endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .kde import Dataset, WeightedECDF, conditional_cdf

__all__ = [
    "ModalInterval",
    "QuantileLevelSet",
    "shortest_interval",
    "mi_quantile_levels",
    "estimate_levels_all",
    "estimate_intervals_at",
    "true_mi_normal",
    "true_mi_lognormal",
]


@dataclass(frozen=True)
class ModalInterval:
    """Interval [low, up] requested to hold mass at least ``coverage``."""

    low: float
    up: float
    coverage: float

    @property
    def width(self) -> float:
        return self.up - self.low


@dataclass(frozen=True)
class QuantileLevelSet:
    """Per-observation quantile levels of the two interval endpoints."""

    p_low: np.ndarray
    p_up: np.ndarray

    def __post_init__(self):
        p_low = np.asarray(self.p_low, dtype=float)
        p_up = np.asarray(self.p_up, dtype=float)
        if p_low.shape != p_up.shape or p_low.ndim != 1:
            raise ValueError("level arrays must be 1-d and of equal length")
        if np.any(p_low <= 0.0) or np.any(p_up >= 1.0) or np.any(p_low >= p_up):
            raise ValueError("levels must satisfy 0 < p_low < p_up < 1")
        object.__setattr__(self, "p_low", p_low)
        object.__setattr__(self, "p_up", p_up)

    def __len__(self) -> int:
        return self.p_low.size


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"coverage level must lie in (0, 1), got {alpha}")


def _shortest_indices(values, cum, pw, alpha):
    """Index pair (i, j) of the narrowest closed interval with mass >= alpha.

    Two-pointer sweep: the smallest feasible j is nondecreasing in i because
    closed-interval mass cum[j] - cum[i] + pw[i] shrinks as i advances.
    """
    m = values.size
    best = None
    j = 0
    for i in range(m):
        if j < i:
            j = i
        ci = cum[i] - pw[i]
        while j < m and cum[j] - ci < alpha:
            j += 1
        if j == m:
            break  # larger i only lowers the mass further
        width = values[j] - values[i]
        if best is None or width < best[0]:
            best = (width, i, j)
    if best is None:
        raise ValueError(f"no interval reaches coverage {alpha}")
    return best[1], best[2]


def shortest_interval(ecdf: WeightedECDF, alpha: float) -> ModalInterval:
    """Narrowest closed interval with mass at least alpha.

    Endpoints are support points of the distribution; equal-width ties go
    to the smallest left endpoint.  A single atom carrying mass >= alpha
    yields a zero-width interval.
    """
    _check_alpha(alpha)
    i, j = _shortest_indices(ecdf.values, ecdf.cum, ecdf.point_weight, alpha)
    return ModalInterval(float(ecdf.values[i]), float(ecdf.values[j]), alpha)


def _levels_at_indices(cum, pw, i, j):
    """Quantile levels of interval endpoints, clamped away from {0, 1}."""
    # half the smallest positive weight, floored so 1 - eps < 1 holds in
    # float64 even when far-tail kernel weights underflow
    eps = max(0.5 * float(pw[pw > 0.0].min()), np.finfo(float).eps)
    p_up = min(float(cum[j]), 1.0 - eps)
    p_low = max(float(cum[i] - pw[i]), eps)
    return p_low, p_up


def mi_quantile_levels(ecdf: WeightedECDF, mi: ModalInterval):
    """Quantile levels (p_low, p_up) of the interval endpoints under ecdf.

    p_up is the CDF value at the upper endpoint; p_low is the CDF value
    just below the lower endpoint, so that p_up - p_low equals the closed
    interval's mass.  Both are clamped into (0, 1) by half the smallest
    point weight so downstream quantile losses stay non-degenerate.
    """
    values = ecdf.values
    i = int(np.searchsorted(values, mi.low))
    j = int(np.searchsorted(values, mi.up))
    if i >= values.size or values[i] != mi.low:
        raise ValueError(f"lower endpoint {mi.low} is not a support point")
    if j >= values.size or values[j] != mi.up:
        raise ValueError(f"upper endpoint {mi.up} is not a support point")
    return _levels_at_indices(ecdf.cum, ecdf.point_weight, i, j)


# ---------------------------------------------------------------------------
# Per-observation interval scan
# ---------------------------------------------------------------------------

def _interval_and_levels(x0: float, source: Dataset, alpha: float, h: float):
    """Conditional shortest-interval endpoints and levels at one covariate."""
    ecdf = conditional_cdf(x0, source, h)
    i, j = _shortest_indices(ecdf.values, ecdf.cum, ecdf.point_weight, alpha)
    p_low, p_up = _levels_at_indices(ecdf.cum, ecdf.point_weight, i, j)
    return float(ecdf.values[i]), float(ecdf.values[j]), p_low, p_up


def _capped_source(data: Dataset, cap: int, rng) -> Dataset:
    """Subsample used to build conditional distributions when n exceeds cap."""
    if cap < 50:
        raise ValueError(f"cap must be at least 50, got {cap}")
    n = len(data)
    if n <= cap:
        return data
    rng = np.random.default_rng(rng)
    keep = np.sort(rng.choice(n, size=cap, replace=False))
    return Dataset(data.x[keep], data.y[keep])


def estimate_levels_all(
    data: Dataset, alpha: float, h: float, cap: int = 1000, rng=0
) -> QuantileLevelSet:
    """Quantile levels of the conditional shortest interval at every x_i.

    For each observation the conditional distribution of Y at x_i is formed
    by kernel weighting, its shortest interval with mass alpha is located,
    and the interval endpoints are converted to quantile levels.  When n
    exceeds ``cap`` the conditional distributions are built from a seeded
    random subsample of size cap, but levels are still produced at all n
    observation points.

    Parameters
    ----------
    data : Dataset
        Observed sample.
    alpha : float
        Target coverage in (0, 1).
    h : float
        Kernel bandwidth.
    cap : int
        Largest source-sample size used to build conditional distributions.
    rng : int, sequence of ints, or numpy Generator
        Seed for the subsample draw; ignored when n <= cap.
    """
    _check_alpha(alpha)
    if h <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    source = _capped_source(data, cap, rng)
    n = len(data)
    p_low = np.empty(n)
    p_up = np.empty(n)
    for i, x0 in enumerate(data.x):
        _, _, p_low[i], p_up[i] = _interval_and_levels(float(x0), source, alpha, h)
    return QuantileLevelSet(p_low=p_low, p_up=p_up)


def estimate_intervals_at(
    data: Dataset, queries, alpha: float, h: float, cap: int = 1000, rng=0
):
    """Conditional shortest-interval endpoints at arbitrary query covariates.

    Returns (low, up) arrays aligned with ``queries``.  This is the direct
    kernel-CDF interval estimate, with no smoothing stage on top.
    """
    _check_alpha(alpha)
    if h <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    queries = np.atleast_1d(np.asarray(queries, dtype=float))
    source = _capped_source(data, cap, rng)
    low = np.empty(queries.size)
    up = np.empty(queries.size)
    for q, x0 in enumerate(queries):
        low[q], up[q], _, _ = _interval_and_levels(float(x0), source, alpha, h)
    return low, up


# ---------------------------------------------------------------------------
# Exact intervals for known conditional distributions
# ---------------------------------------------------------------------------

def true_mi_normal(mu: float, sigma: float, alpha: float) -> ModalInterval:
    """Shortest interval with mass alpha of a normal distribution.

    By symmetry and unimodality it is centered at the mean:
    [mu - z*sigma, mu + z*sigma] with z the (1+alpha)/2 normal quantile.
    """
    _check_alpha(alpha)
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    z = float(ndtri(0.5 * (1.0 + alpha)))
    return ModalInterval(mu - z * sigma, mu + z * sigma, alpha)


def _golden_min(fun, lo: float, hi: float, iterations: int = 200):
    """Golden-section minimizer of a unimodal scalar function on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iterations):
        if b - a < 1e-14:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def true_mi_lognormal(mu: float, sigma: float, alpha: float) -> ModalInterval:
    """Shortest interval with mass alpha of a log-normal distribution.

    The interval [Q(p), Q(p + alpha)] is narrowest at the p minimizing its
    width, located by golden-section search over p in (0, 1 - alpha) with a
    grid-scan fallback guarding against a missed basin.
    """
    _check_alpha(alpha)
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")

    def quantile(p):
        return np.exp(mu + sigma * ndtri(p))

    def width(p):
        return quantile(p + alpha) - quantile(p)

    eps = 1e-12
    lo, hi = eps, 1.0 - alpha - eps
    p_star = _golden_min(width, lo, hi)

    # fallback: coarse scan catches a basin the golden section may have missed
    grid = np.linspace(lo, hi, 2049)
    widths = quantile(grid + alpha) - quantile(grid)
    k = int(np.argmin(widths))
    if widths[k] < width(p_star):
        p_star = _golden_min(width, grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)])

    return ModalInterval(float(quantile(p_star)), float(quantile(p_star + alpha)), alpha)
