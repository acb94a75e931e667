"""Joint band fit as a convex program solved by ADMM.

The two bound curves share one coefficient vector c = (c_up, c_low).  The
objective is the weighted quantile loss of both curves at their
per-observation levels plus a curvature penalty,

    sum_i w_i J_{p_i}(y_i - (A c)_i) + lambda * c' Q c,

subject to continuity (H c = 0) and the segmentwise non-crossing
condition (G c >= 0).  Splitting with z1 = A c and z2 = G c gives ADMM
updates in which z1 is a componentwise quantile-loss proximal step and z2
a projection onto the nonnegative orthant.  The c-update is an
equality-constrained least-squares problem solved through its KKT system,
factored once and reused across iterations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .intervals import QuantileLevelSet
from .kde import Dataset
from .spline import (
    SplineBasis,
    continuity_matrix,
    design_matrix,
    eval_spline,
    noncross_matrix,
    penalty_matrix,
)

__all__ = [
    "MirProblem",
    "AdmmState",
    "FittedBand",
    "assemble",
    "quantile_loss",
    "prox_quantile_loss",
    "project_nonneg",
    "objective",
    "admm_fit",
]


@dataclass(frozen=True)
class MirProblem:
    """Assembled block program for one band fit."""

    A: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    G: np.ndarray
    p: np.ndarray
    y: np.ndarray
    w: np.ndarray
    lam: float
    gamma: float
    basis: SplineBasis
    n: int


@dataclass
class AdmmState:
    """Iterate carrier: consensus variables, scaled duals, residual traces."""

    c: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    iteration: int = 0
    primal_residuals: list = field(default_factory=list)
    dual_residuals: list = field(default_factory=list)


@dataclass(frozen=True)
class FittedBand:
    """Fitted bound curves with solver diagnostics."""

    upper: np.ndarray
    lower: np.ndarray
    basis: SplineBasis
    iterations: int = 0
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    primal_history: np.ndarray | None = None
    dual_history: np.ndarray | None = None
    noncross_violation: float = np.nan

    def upper_at(self, x):
        return eval_spline(self.upper, self.basis, x)

    def lower_at(self, x):
        return eval_spline(self.lower, self.basis, x)

    def midpoint_at(self, x):
        return 0.5 * (self.upper_at(x) + self.lower_at(x))

    def width_at(self, x):
        return self.upper_at(x) - self.lower_at(x)


def assemble(
    data: Dataset,
    levels: QuantileLevelSet,
    weights,
    basis: SplineBasis,
    lam: float,
    gamma: float = 1.0,
) -> MirProblem:
    """Build the block program coupling the two bound curves.

    The design, penalty and continuity blocks are duplicated block-diagonally
    for the upper and lower curve; the non-crossing block acts on the
    coefficient difference.  Level order matches the stacking: upper-curve
    levels first, then lower-curve levels.
    """
    weights = np.asarray(weights, dtype=float)
    n = len(data)
    if len(levels) != n:
        raise ValueError(f"level count {len(levels)} does not match n={n}")
    if weights.shape != (n,):
        raise ValueError(f"weight shape {weights.shape} does not match n={n}")
    if np.any(weights <= 0.0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be positive and finite")
    if lam <= 0.0:
        raise ValueError(f"penalty strength must be positive, got {lam}")
    if gamma <= 0.0:
        raise ValueError(f"step size must be positive, got {gamma}")

    A_single = design_matrix(data.x, basis)  # raises when x leaves the knot range
    Q_single = penalty_matrix(basis)
    H_single = continuity_matrix(basis)
    G_single = noncross_matrix(basis)

    A = linalg.block_diag(A_single, A_single)
    Q = linalg.block_diag(Q_single, Q_single)
    H = linalg.block_diag(H_single, H_single)
    G = np.hstack([G_single, -G_single])

    return MirProblem(
        A=A,
        Q=Q,
        H=H,
        G=G,
        p=np.concatenate([levels.p_up, levels.p_low]),
        y=np.concatenate([data.y, data.y]),
        w=np.concatenate([weights, weights]),
        lam=float(lam),
        gamma=float(gamma),
        basis=basis,
        n=n,
    )


def quantile_loss(t, p):
    """Tilted absolute loss: p*t for t >= 0, (p-1)*t for t < 0."""
    t = np.asarray(t, dtype=float)
    return np.where(t >= 0.0, p * t, (p - 1.0) * t)


def prox_quantile_loss(z, p, y, w, gamma):
    """Proximal step of v -> w * J_p(y - v) with step size gamma.

    Minimizes w * J_p(y - v) + (1/(2*gamma)) * (v - z)^2.  All arguments
    broadcast elementwise.
    """
    z = np.asarray(z, dtype=float)
    t_up = gamma * np.asarray(p) * np.asarray(w)
    t_down = gamma * (1.0 - np.asarray(p)) * np.asarray(w)
    r = np.asarray(y) - z
    out = np.where(r >= t_up, z + t_up, np.where(r <= -t_down, z - t_down, y))
    return float(out) if out.ndim == 0 else out


def project_nonneg(z):
    """Euclidean projection onto the nonnegative orthant."""
    out = np.maximum(np.asarray(z, dtype=float), 0.0)
    return float(out) if out.ndim == 0 else out


def objective(problem: MirProblem, c) -> float:
    """Penalized quantile-loss objective at coefficients c."""
    c = np.asarray(c, dtype=float)
    r = problem.y - problem.A @ c
    return float(problem.w @ quantile_loss(r, problem.p) + problem.lam * c @ problem.Q @ c)


_NONCROSS_GRID = 1001


def admm_fit(
    problem: MirProblem,
    iters: int = 1000,
    stop_tol: float | None = 1e-8,
) -> FittedBand:
    """Run scaled ADMM on the assembled program.

    The c-update solves the equality-constrained quadratic subproblem via a
    KKT system whose factorization is computed once.  Iteration stops at
    the fixed budget, or earlier when both residual norms drop below
    ``stop_tol`` (pass None to disable early stopping).

    Parameters
    ----------
    problem : MirProblem
        Assembled program from :func:`assemble`.
    iters : int
        Iteration budget, at least 1.
    stop_tol : float or None
        Early-stopping threshold on the primal and dual residual norms.

    Returns
    -------
    FittedBand
        Coefficients of both curves plus residual traces and a grid check
        of the non-crossing constraint.
    """
    if iters < 1:
        raise ValueError(f"iteration budget must be at least 1, got {iters}")
    A, Q, H, G = problem.A, problem.Q, problem.H, problem.G
    p, y, w = problem.p, problem.y, problem.w
    rho = 1.0 / problem.gamma
    m2 = A.shape[1]
    nH = H.shape[0]

    M = 2.0 * problem.lam * Q + rho * (A.T @ A + G.T @ G)
    K = np.zeros((m2 + nH, m2 + nH))
    K[:m2, :m2] = M
    K[:m2, m2:] = H.T
    K[m2:, :m2] = H
    try:
        lu, piv = linalg.lu_factor(K)
    except linalg.LinAlgError as exc:
        raise ValueError(f"rank-deficient constraints: {exc}") from exc
    diag = np.abs(np.diag(lu))
    if diag.min() <= diag.max() * 1e-13:
        raise ValueError("rank-deficient constraints: singular KKT system")

    At, Gt = A.T.copy(), G.T.copy()
    state = AdmmState(
        c=np.zeros(m2),
        z1=np.zeros(A.shape[0]),
        z2=np.zeros(G.shape[0]),
        u1=np.zeros(A.shape[0]),
        u2=np.zeros(G.shape[0]),
    )
    rhs = np.zeros(m2 + nH)

    for it in range(1, iters + 1):
        rhs[:m2] = rho * (At @ (state.z1 - state.u1) + Gt @ (state.z2 - state.u2))
        state.c = linalg.lu_solve((lu, piv), rhs)[:m2]
        Ac = A @ state.c
        Gc = G @ state.c

        z1_new = prox_quantile_loss(Ac + state.u1, p, y, w, problem.gamma)
        z2_new = project_nonneg(Gc + state.u2)
        dual = rho * np.linalg.norm(At @ (z1_new - state.z1) + Gt @ (z2_new - state.z2))
        state.z1, state.z2 = z1_new, z2_new
        state.u1 = state.u1 + Ac - state.z1
        state.u2 = state.u2 + Gc - state.z2
        primal = np.sqrt(
            np.linalg.norm(Ac - state.z1) ** 2 + np.linalg.norm(Gc - state.z2) ** 2
        )

        if not (np.isfinite(primal) and np.isfinite(dual) and np.all(np.isfinite(state.c))):
            raise RuntimeError(f"non-finite iterates at iteration {it}")
        state.iteration = it
        state.primal_residuals.append(primal)
        state.dual_residuals.append(dual)
        if stop_tol is not None and primal < stop_tol and dual < stop_tol:
            break

    m = problem.basis.size
    upper, lower = state.c[:m], state.c[m:]
    grid = np.linspace(problem.basis.knots[0], problem.basis.knots[-1], _NONCROSS_GRID)
    gap = eval_spline(upper, problem.basis, grid) - eval_spline(lower, problem.basis, grid)
    violation = float(max(0.0, -gap.min()))
    if violation > 1e-6:
        warnings.warn(
            f"non-crossing violated by {violation:.3e} on the evaluation grid",
            RuntimeWarning,
            stacklevel=2,
        )

    return FittedBand(
        upper=upper,
        lower=lower,
        basis=problem.basis,
        iterations=state.iteration,
        primal_residual=state.primal_residuals[-1],
        dual_residual=state.dual_residuals[-1],
        primal_history=np.asarray(state.primal_residuals),
        dual_history=np.asarray(state.dual_residuals),
        noncross_violation=violation,
    )
