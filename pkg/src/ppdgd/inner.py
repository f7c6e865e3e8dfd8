"""Inner minimization over x and the induced dual function.

For a multiplier lam the inner problem is min_{x in X} f(x) + lam'Ax; its
value is the dual function phi(lam) and its gradient is A x*(lam). With X
free the solve is exact through the Cholesky factor cached on the Problem;
with a box and diagonal H it is an exact componentwise clamp; otherwise a
projected gradient descent with fixed step 1/alpha_m is used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InnerSolveDiverged
from .geometry import project_box
from .model import Problem, cholesky_solve

PGD_TOL = 1e-10
PGD_MAX_ITER = 10_000
PGD_FAIL_RESIDUAL = 1e-6


@dataclass(frozen=True)
class InnerSolution:
    x_star: np.ndarray
    phi: float
    grad_phi: np.ndarray
    iterations: int
    residual: float


def _pgd_box_dense(P: Problem, lam: np.ndarray):
    """Projected gradient descent on f(x) + lam'Ax over a box, dense H."""
    atl = P.A.T @ lam
    lin = P.f.c + atl
    x = project_box(cholesky_solve(P.chol, -lin), P.X)
    step = 1.0 / P.alpha_m
    for it in range(1, PGD_MAX_ITER + 1):
        g = P.f.H @ x + lin
        x_next = project_box(x - step * g, P.X)
        x = x_next
        residual = float(np.linalg.norm(x - project_box(x - (P.f.H @ x + lin), P.X)))
        if residual <= PGD_TOL:
            return x, it, residual
    if residual > PGD_FAIL_RESIDUAL:
        raise InnerSolveDiverged(
            f"projected gradient hit {PGD_MAX_ITER} iterations with residual {residual:.3e}"
        )
    return x, PGD_MAX_ITER, residual


def _grad_phi(P: Problem, lam: np.ndarray) -> np.ndarray:
    """Dual gradient A x*(lam) without the full InnerSolution (hot path)."""
    if P.inner_mode == "free":
        return P.grad_base - P.dual_gram @ lam
    if P.inner_mode == "box_diag":
        x = np.clip(P.x_base - P.dual_map @ lam, P.X.lo, P.X.hi)
        return P.A @ x
    x, _, _ = _pgd_box_dense(P, lam)
    return P.A @ x


def solve_inner(P: Problem, lam) -> InnerSolution:
    """Solve the inner minimization at lam and evaluate phi and its gradient."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (P.p,):
        raise DimensionMismatch(f"lambda has shape {lam.shape}, expected ({P.p},)")
    iterations = 0
    if P.inner_mode == "free":
        x = P.x_base - P.dual_map @ lam
    elif P.inner_mode == "box_diag":
        x = np.clip(P.x_base - P.dual_map @ lam, P.X.lo, P.X.hi)
    else:
        x, iterations, _ = _pgd_box_dense(P, lam)
    g = P.f.grad(x) + P.A.T @ lam
    residual = float(np.linalg.norm(x - project_box(x - g, P.X)))
    ax = P.A @ x
    phi = P.f.value(x) + float(lam @ ax)
    return InnerSolution(x_star=x, phi=phi, grad_phi=ax, iterations=iterations, residual=residual)


def strong_concavity_check(P: Problem, lam1, lam2) -> float:
    """Margin of the dual strong-concavity inequality for a pair of multipliers.

    Returns <lam1 - lam2, grad_phi(lam1) - grad_phi(lam2)> +
    (kappa1 / alpha_m) ||lam1 - lam2||^2, which is <= 0 (up to roundoff)
    whenever X is free. With an active box face the value is only monitored.
    """
    lam1 = np.asarray(lam1, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    d = lam1 - lam2
    g1 = solve_inner(P, lam1).grad_phi
    g2 = solve_inner(P, lam2).grad_phi
    return float(d @ (g1 - g2) + (P.kappa1 / P.alpha_m) * (d @ d))
