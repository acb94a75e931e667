"""Kernel machinery: Gaussian kernel, plug-in bandwidth selection, and
kernel-weighted conditional distributions.

Conventions:
    u = (x_i - x0) / h
    K(u) = exp(-u^2 / 2) / sqrt(2*pi)        (standard normal density)
    f_hat(x) = (1 / (n*h)) * sum_i K((x - x_i) / h)

The conditional CDF of Y given X = x0 is the kernel-weighted empirical
distribution of the responses: each observation y_i carries weight
K((x_i - x0)/h), and the weights are normalized to sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

__all__ = [
    "Dataset",
    "WeightedECDF",
    "gaussian_kernel",
    "select_bandwidth",
    "normal_reference_bandwidth",
    "conditional_cdf",
    "density_weights",
]

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))

# Kernel weights below this are treated as exactly zero so that queries far
# outside the covariate support fail loudly instead of dividing 0 by 0.
WEIGHT_FLOOR = 1e-300

_PAIR_BLOCK = 1024  # row block size for pairwise kernel sums


@dataclass(frozen=True)
class Dataset:
    """Paired covariate/response sample. Arrays are 1-d, equal length, finite."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.ndim != 1 or y.ndim != 1:
            raise ValueError("x and y must be one-dimensional")
        if x.size != y.size:
            raise ValueError(
                f"length mismatch: {x.size} covariate values vs {y.size} responses"
            )
        if x.size == 0:
            raise ValueError("empty dataset")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class WeightedECDF:
    """Step distribution on sorted distinct values with positive total mass.

    ``cum[k]`` is the probability mass of ``(-inf, values[k]]``; the final
    entry equals one up to roundoff.  ``point_weight[k]`` is the mass of the
    atom at ``values[k]``.
    """

    values: np.ndarray
    cum: np.ndarray
    point_weight: np.ndarray

    @classmethod
    def from_samples(cls, values, weights) -> "WeightedECDF":
        """Build the distribution from raw samples and nonnegative weights."""
        values = np.asarray(values, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if values.shape != weights.shape or values.ndim != 1:
            raise ValueError("values and weights must be 1-d arrays of equal length")
        if np.any(weights < 0.0):
            raise ValueError("negative weights")
        total = weights.sum()
        if total <= 0.0:
            raise ValueError("all weights are zero")
        uniq, inverse = np.unique(values, return_inverse=True)
        pw = np.bincount(inverse, weights=weights, minlength=uniq.size) / total
        return cls(values=uniq, cum=np.cumsum(pw), point_weight=pw)


def gaussian_kernel(u):
    """Standard normal density, elementwise."""
    u = np.asarray(u, dtype=float)
    out = np.exp(-0.5 * u * u) / _SQRT_2PI
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Bandwidth selection
# ---------------------------------------------------------------------------

def _robust_scale(x: np.ndarray) -> float:
    """min(sample sd, IQR/1.349); falls back to the sd when the IQR is zero."""
    sd = float(x.std(ddof=1))
    q75, q25 = np.percentile(x, [75.0, 25.0])
    iqr = float(q75 - q25)
    if iqr > 0.0:
        return min(sd, iqr / 1.349)
    return sd


def normal_reference_bandwidth(x) -> float:
    """Normal-reference rule h = 1.06 * sigma_hat * n^(-1/5)."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 points for a bandwidth")
    sd = float(x.std(ddof=1))
    if sd == 0.0:
        raise ValueError("degenerate sample: all covariate values are identical")
    return 1.06 * _robust_scale(x) * n ** (-0.2)


def _pair_counts(x: np.ndarray, nbins: int):
    """Histogram of pairwise distances |x_i - x_j| over i < j.

    Returns bin-center distances and pair counts; the diagonal (i = j) is
    excluded and added analytically by the functional estimators.
    """
    n = x.size
    span = float(x.max() - x.min())
    counts = np.zeros(nbins, dtype=float)
    for start in range(0, n, _PAIR_BLOCK):
        block = x[start:start + _PAIR_BLOCK, None]
        d = np.abs(block - x[None, :])
        # keep strictly-upper-triangle entries only
        rows, cols = np.indices(d.shape)
        mask = (cols > rows + start)
        counts += np.histogram(d[mask], bins=nbins, range=(0.0, span))[0]
    centers = (np.arange(nbins) + 0.5) * (span / nbins)
    return centers, counts


def _phi4_sum(g: float, centers: np.ndarray, counts: np.ndarray, n: int) -> float:
    """Estimate of the integrated squared second density derivative."""
    u = centers / g
    term = (u**4 - 6.0 * u**2 + 3.0) * np.exp(-0.5 * u * u) / _SQRT_2PI
    s = 2.0 * float(counts @ term) + n * 3.0 / _SQRT_2PI
    return s / (n * (n - 1) * g**5)


def _phi6_sum(g: float, centers: np.ndarray, counts: np.ndarray, n: int) -> float:
    """Estimate of the (negative) integrated squared third density derivative."""
    u = centers / g
    term = (u**6 - 15.0 * u**4 + 45.0 * u**2 - 15.0) * np.exp(-0.5 * u * u) / _SQRT_2PI
    s = 2.0 * float(counts @ term) + n * (-15.0) / _SQRT_2PI
    return s / (n * (n - 1) * g**7)


def select_bandwidth(x, nbins: int = 1000) -> float:
    """Solve-the-equation plug-in bandwidth for a Gaussian kernel.

    Solves h = [ R(K) / (n * psi4(g(h)) ) ]^(1/5) where the pilot bandwidth
    g(h) is calibrated from pairwise-distance functionals of the sample.
    Falls back to the normal-reference rule when the root search fails.

    Parameters
    ----------
    x : array_like
        Sample of covariate values, at least 10 points, not all identical.
    nbins : int
        Resolution of the pairwise-distance histogram used by the
        functional estimators.

    Returns
    -------
    float
        Selected bandwidth, always strictly positive.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise ValueError(f"need at least 10 points to select a bandwidth, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values in sample")
    sd = float(x.std(ddof=1))
    if sd == 0.0:
        raise ValueError("degenerate sample: all covariate values are identical")

    scale = _robust_scale(x)
    centers, counts = _pair_counts(x, nbins)

    a = 1.24 * scale * n ** (-1.0 / 7.0)
    b = 1.23 * scale * n ** (-1.0 / 9.0)
    td = -_phi6_sum(b, centers, counts, n)
    sda = _phi4_sum(a, centers, counts, n)
    if not np.isfinite(td) or td <= 0.0 or not np.isfinite(sda) or sda <= 0.0:
        return normal_reference_bandwidth(x)
    alpha2 = 1.357 * (sda / td) ** (1.0 / 7.0)

    def gap(h: float) -> float:
        psi = _phi4_sum(alpha2 * h ** (5.0 / 7.0), centers, counts, n)
        if not np.isfinite(psi) or psi <= 0.0:
            return np.nan
        return (1.0 / (2.0 * np.sqrt(np.pi) * n * psi)) ** 0.2 - h

    hmax = 1.144 * sd * n ** (-0.2)
    lo, hi = 0.1 * hmax, hmax
    flo, fhi = gap(lo), gap(hi)
    for attempt in range(99):
        if not (np.isfinite(flo) and np.isfinite(fhi)):
            return normal_reference_bandwidth(x)
        if flo * fhi <= 0.0:
            break
        if attempt % 2 == 0:
            hi *= 1.2
            fhi = gap(hi)
        else:
            lo /= 1.2
            flo = gap(lo)
    else:
        return normal_reference_bandwidth(x)

    try:
        h = optimize.brentq(gap, lo, hi, xtol=1e-12 * scale, rtol=1e-14, maxiter=200)
    except (ValueError, RuntimeError):
        return normal_reference_bandwidth(x)
    if not np.isfinite(h) or h <= 0.0:
        return normal_reference_bandwidth(x)
    return float(h)


# ---------------------------------------------------------------------------
# Conditional distribution and observation weights
# ---------------------------------------------------------------------------

def conditional_cdf(x0: float, data: Dataset, h: float) -> WeightedECDF:
    """Kernel-weighted empirical distribution of Y at the covariate value x0.

    Parameters
    ----------
    x0 : float
        Query point; must carry nonzero kernel mass from the sample.
    data : Dataset
        Observed sample.
    h : float
        Kernel bandwidth, strictly positive.

    Returns
    -------
    WeightedECDF
        Conditional step distribution of the responses at x0.
    """
    if h <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    if not np.isfinite(x0):
        raise ValueError("query point must be finite")
    w = gaussian_kernel((data.x - x0) / h)
    w[w < WEIGHT_FLOOR] = 0.0
    if w.sum() <= 0.0:
        raise ValueError(
            f"no kernel support at x0={x0}: all weights underflow at bandwidth {h}"
        )
    return WeightedECDF.from_samples(data.y, w)


def density_weights(data: Dataset, h: float, exponent: float = 0.2) -> np.ndarray:
    """Observation weights w_i = f_hat(x_i)^exponent from the covariate KDE.

    Points in dense covariate regions receive larger weights; the power
    transform (default 1/5) compresses the dynamic range.
    """
    if h <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    x = data.x
    n = x.size
    dens = np.empty(n, dtype=float)
    for start in range(0, n, _PAIR_BLOCK):
        block = x[start:start + _PAIR_BLOCK, None]
        dens[start:start + _PAIR_BLOCK] = gaussian_kernel((block - x[None, :]) / h).sum(axis=1)
    dens /= n * h
    return dens**exponent
