"""Two-stage band fit: interval levels from kernel CDFs, then the spline fit.

Stage 1 selects a bandwidth, extracts per-observation shortest-interval
quantile levels, and computes density-based observation weights.  Stage 2
assembles the convex program and runs ADMM.  Both stages are exposed
separately so cross-validation and simulation can share stage-1 output
across penalty values.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .intervals import QuantileLevelSet, estimate_levels_all
from .kde import Dataset, density_weights, select_bandwidth
from .solver import FittedBand, admm_fit, assemble
from .spline import SplineBasis

__all__ = [
    "Step1Result",
    "run_step1",
    "run_step2",
    "fit_band",
    "save_model",
    "load_model",
    "atomic_write_text",
]


@dataclass(frozen=True)
class Step1Result:
    """Bandwidth, per-observation levels, and observation weights."""

    bandwidth: float
    levels: QuantileLevelSet
    weights: np.ndarray


def run_step1(
    data: Dataset,
    alpha: float = 0.5,
    *,
    cap: int = 1000,
    rng=0,
    weight_exponent: float = 0.2,
    bandwidth: float | None = None,
) -> Step1Result:
    """Interval levels and weights for every observation.

    Parameters
    ----------
    data : Dataset
        Observed sample.
    alpha : float
        Target coverage of the conditional shortest interval.
    cap : int
        Largest source-sample size for the conditional distributions; above
        it a seeded subsample is used.
    rng : int, sequence of ints, or numpy Generator
        Seed for the subsample draw.
    weight_exponent : float
        Power applied to the covariate density in the observation weights.
    bandwidth : float, optional
        Kernel bandwidth; selected by the plug-in rule when omitted.
    """
    h = select_bandwidth(data.x) if bandwidth is None else float(bandwidth)
    if h <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    levels = estimate_levels_all(data, alpha, h, cap=cap, rng=rng)
    weights = density_weights(data, h, exponent=weight_exponent)
    return Step1Result(bandwidth=h, levels=levels, weights=weights)


def run_step2(
    data: Dataset,
    step1: Step1Result,
    basis: SplineBasis,
    lam: float,
    *,
    gamma: float = 1.0,
    iters: int = 1000,
    stop_tol: float | None = 1e-8,
) -> FittedBand:
    """Fit the non-crossing bound curves at one penalty value."""
    problem = assemble(data, step1.levels, step1.weights, basis, lam, gamma)
    return admm_fit(problem, iters=iters, stop_tol=stop_tol)


def fit_band(
    data: Dataset,
    alpha: float = 0.5,
    lam: float = 1e-2,
    basis: SplineBasis | None = None,
    *,
    segments: int = 20,
    degree: int = 3,
    smoothness: int = 2,
    cap: int = 1000,
    rng=0,
    weight_exponent: float = 0.2,
    bandwidth: float | None = None,
    gamma: float = 1.0,
    iters: int = 1000,
    stop_tol: float | None = 1e-8,
):
    """Full two-stage fit; returns (band, step1).

    When no basis is given, a uniform knot grid with the requested segment
    count is placed over the covariate range.
    """
    if basis is None:
        basis = SplineBasis.uniform(
            float(data.x.min()), float(data.x.max()), segments, degree, smoothness
        )
    step1 = run_step1(
        data, alpha, cap=cap, rng=rng,
        weight_exponent=weight_exponent, bandwidth=bandwidth,
    )
    band = run_step2(
        data, step1, basis, lam, gamma=gamma, iters=iters, stop_tol=stop_tol
    )
    return band, step1


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def atomic_write_text(path: str, text: str) -> None:
    """Write a file fully or not at all: temp file in place, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(path: str, band: FittedBand, config: dict | None = None) -> None:
    """Persist a fitted band as JSON with full float precision."""
    payload = {
        "knots": band.basis.knots.tolist(),
        "degree": band.basis.degree,
        "smoothness": band.basis.smoothness,
        "upper": band.upper.tolist(),
        "lower": band.lower.tolist(),
        "config": config or {},
        "residuals": {
            "iterations": band.iterations,
            "primal": band.primal_residual,
            "dual": band.dual_residual,
            "noncross_violation": band.noncross_violation,
        },
    }
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def load_model(path: str):
    """Load a fitted band saved by :func:`save_model`; returns (band, config)."""
    with open(path) as handle:
        payload = json.load(handle)
    try:
        basis = SplineBasis(
            np.asarray(payload["knots"], dtype=float),
            int(payload["degree"]),
            int(payload["smoothness"]),
        )
        upper = np.asarray(payload["upper"], dtype=float)
        lower = np.asarray(payload["lower"], dtype=float)
        residuals = payload.get("residuals", {})
    except KeyError as exc:
        raise ValueError(f"model file {path} is missing field {exc}") from exc
    if upper.shape != (basis.size,) or lower.shape != (basis.size,):
        raise ValueError(
            f"model file {path} has inconsistent coefficient counts"
        )
    band = FittedBand(
        upper=upper,
        lower=lower,
        basis=basis,
        iterations=int(residuals.get("iterations", 0)),
        primal_residual=float(residuals.get("primal", np.nan)),
        dual_residual=float(residuals.get("dual", np.nan)),
        noncross_violation=float(residuals.get("noncross_violation", np.nan)),
    )
    return band, payload.get("config", {})
