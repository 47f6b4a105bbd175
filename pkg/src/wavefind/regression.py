"""Sparse coefficient identification: ridge, STRidge, and Pareto selection.

All solves happen in the scaled domain of a RegressionProblem (unit-norm
columns and target); SparseSolution.xi is reported de-normalized back to
physical scale. The viscous u_t column is passed in as a protected index so
thresholding can never remove it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SparseSolution",
    "ridge",
    "stridge",
    "pareto_gamma",
    "GAMMA_GRID_DEFAULT",
    "TOL_GRID_DEFAULT",
]

GAMMA_GRID_DEFAULT = tuple(10.0**e for e in range(-6, 1))
TOL_GRID_DEFAULT = (0.01, 0.05, 0.1, 0.5, 1.0)

MAX_STRIDGE_ITERS = 25


@dataclass
class SparseSolution:
    """STRidge output: full-length coefficient vector in physical scale."""

    xi: np.ndarray
    support: tuple
    train_error: float
    n_terms: int
    gamma: float
    tol: float


def ridge(theta, target, lam):
    """Solve (theta^T theta + lam I) xi = theta^T target by dense factorization.

    Raises numpy.linalg.LinAlgError for a rank-deficient system at lam = 0;
    the caller retries with lam > 0.
    """
    if lam < 0:
        raise ValueError(f"ridge penalty must be non-negative, got {lam}")
    theta = np.asarray(theta, dtype=float)
    target = np.asarray(target, dtype=float)
    if lam == 0.0:
        xi, _, rank, _ = np.linalg.lstsq(theta, target, rcond=None)
        if rank < theta.shape[1]:
            raise np.linalg.LinAlgError(
                f"rank-deficient system (rank {rank} < {theta.shape[1]}) at lam=0"
            )
        return xi
    gram = theta.T @ theta + lam * np.eye(theta.shape[1])
    return np.linalg.solve(gram, theta.T @ target)


def _stridge_scaled(gram, corr, theta, target, gamma, tol, protected):
    """Iterated threshold/refit on the scaled system; returns the scaled xi."""
    d = gram.shape[0]
    protected = frozenset(protected)
    support = np.arange(d)
    for _ in range(MAX_STRIDGE_ITERS):
        sub = gram[np.ix_(support, support)] + gamma * np.eye(support.size)
        xi_s = np.linalg.solve(sub, corr[support])
        keep = np.array([abs(v) >= tol or j in protected for j, v in zip(support, xi_s)])
        new_support = support[keep]
        if new_support.size == support.size:
            support = new_support
            break
        support = new_support
        if support.size == 0:
            break
    xi = np.zeros(d)
    if support.size:
        xi[support], *_ = np.linalg.lstsq(theta[:, support], target, rcond=None)
    return xi, tuple(int(j) for j in support)


def stridge(problem, gamma, tol, protected=frozenset()):
    """Sequential threshold ridge regression on a RegressionProblem.

    Ridge-solves with penalty gamma, zeroes coefficients below tol (protected
    indices exempt), repeats until the support is stable, then refits the
    final support by plain least squares and de-normalizes.
    """
    if tol <= 0:
        raise ValueError(f"threshold must be positive, got {tol}")
    theta, target = problem.theta, problem.target
    gram = theta.T @ theta
    corr = theta.T @ target
    xi_scaled, support = _stridge_scaled(gram, corr, theta, target, gamma, tol, protected)
    residual = target - theta @ xi_scaled
    train_error = float(np.linalg.norm(residual) / max(np.linalg.norm(target), 1e-300))
    xi = xi_scaled * problem.target_scale / problem.column_scales
    return SparseSolution(
        xi=xi,
        support=tuple(sorted(support)),
        train_error=train_error,
        n_terms=len(support),
        gamma=float(gamma),
        tol=float(tol),
    )


def _row_split(n_rows):
    """Deterministic interleaved 80/20 split: row i validates iff i % 5 == 4."""
    idx = np.arange(n_rows)
    val = idx % 5 == 4
    return idx[~val], idx[val]


def pareto_gamma(problem, gamma_grid=GAMMA_GRID_DEFAULT, tol_grid=TOL_GRID_DEFAULT,
                 protected=frozenset(), complexity_weight=0.05):
    """Select (gamma, tol) at the knee of validation error vs term count.

    Each pair is fitted on the 80% training rows and scored on the 20%
    validation rows as err_v * (1 + complexity_weight * n_terms); the first
    minimizer in grid order wins (deterministic).
    """
    gamma_grid = tuple(gamma_grid)
    tol_grid = tuple(tol_grid)
    if not gamma_grid or not tol_grid:
        raise ValueError("hyperparameter grids must be non-empty")
    if len(gamma_grid) == 1 and len(tol_grid) == 1:
        return gamma_grid[0], tol_grid[0]

    train, val = _row_split(problem.theta.shape[0])
    theta_tr, y_tr = problem.theta[train], problem.target[train]
    theta_val, y_val = problem.theta[val], problem.target[val]
    gram = theta_tr.T @ theta_tr
    corr = theta_tr.T @ y_tr
    y_val_norm = max(np.linalg.norm(y_val), 1e-300)

    best = None
    for gamma in gamma_grid:
        for tol in tol_grid:
            xi, support = _stridge_scaled(gram, corr, theta_tr, y_tr, gamma, tol, protected)
            err_v = float(np.linalg.norm(y_val - theta_val @ xi) / y_val_norm)
            score = err_v * (1.0 + complexity_weight * len(support))
            if best is None or score < best[0]:
                best = (score, gamma, tol)
    return best[1], best[2]
