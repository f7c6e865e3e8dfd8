"""Problem model: box sets, quadratic smooth cost, separable piecewise-quadratic cost.

A problem instance couples a strongly convex quadratic f(x) on X with a
separable, strongly convex, piecewise-quadratic (possibly kinked) h(y) on a
compact box Omega through the affine constraint A x + B y = C. All derived
curvature and rate constants are computed once at build time and the instance
is immutable afterwards, so it can be shared across concurrent solver runs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    NonCompactOmega,
    NotStronglyConvex,
    RankDeficient,
)

CONTINUITY_TOL = 1e-12
RANK_RATIO_TOL = 1e-10


def cholesky_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve H z = b given the lower Cholesky factor L of H."""
    return np.linalg.solve(L.T, np.linalg.solve(L, b))


class SetKind(enum.Enum):
    FREE = "free"
    BOX = "box"


@dataclass(frozen=True, eq=False)
class BoxSet:
    """Axis-aligned box [lo, hi], or all of R^dim when kind is FREE."""

    kind: SetKind
    dim: int
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    @staticmethod
    def free(dim: int) -> "BoxSet":
        if dim < 1:
            raise DimensionMismatch(f"set dimension must be >= 1, got {dim}")
        return BoxSet(SetKind.FREE, dim)

    @staticmethod
    def box(lo, hi) -> "BoxSet":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise DimensionMismatch(
                f"box bounds must be equal-length vectors, got {lo.shape} and {hi.shape}"
            )
        if lo.size == 0:
            raise DimensionMismatch("box must have dimension >= 1")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise NonCompactOmega("box bounds must be finite")
        if np.any(lo > hi):
            bad = int(np.argmax(lo > hi))
            raise DimensionMismatch(f"lo[{bad}] > hi[{bad}] ({lo[bad]} > {hi[bad]})")
        return BoxSet(SetKind.BOX, lo.size, lo, hi)

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise DimensionMismatch(f"expected vector of length {self.dim}, got {v.shape}")
        if self.kind is SetKind.FREE:
            return True
        return bool(np.all(v >= self.lo - tol) and np.all(v <= self.hi + tol))

    def center(self) -> np.ndarray:
        if self.kind is SetKind.FREE:
            return np.zeros(self.dim)
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True, eq=False)
class QuadraticSmoothFn:
    """f(x) = 0.5 x'Hx + c'x + d with H symmetric positive definite."""

    H: np.ndarray
    c: np.ndarray
    d: float = 0.0
    alpha: float = field(init=False, default=0.0)     # smallest eigenvalue of H
    alpha_m: float = field(init=False, default=0.0)   # largest eigenvalue of H

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise DimensionMismatch(f"H must be square, got shape {H.shape}")
        if c.shape != (H.shape[0],):
            raise DimensionMismatch(f"c has shape {c.shape}, expected ({H.shape[0]},)")
        if not np.allclose(H, H.T, atol=1e-12 * max(1.0, float(np.abs(H).max()))):
            raise DimensionMismatch("H must be symmetric")
        H = 0.5 * (H + H.T)
        eigs = np.linalg.eigvalsh(H)
        if eigs[0] <= 0.0:
            raise NotStronglyConvex(f"H is not positive definite (min eigenvalue {eigs[0]})")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "alpha", float(eigs[0]))
        object.__setattr__(self, "alpha_m", float(eigs[-1]))

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return bool(np.count_nonzero(self.H - np.diag(np.diagonal(self.H))) == 0)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.c @ x + self.d)

    def grad(self, x) -> np.ndarray:
        return self.H @ np.asarray(x, dtype=float) + self.c


@dataclass(frozen=True, eq=False)
class PiecewiseScalarFn:
    """One coordinate of h: convex piecewise quadratic with K breakpoints.

    Piece i has coefficients (p, q, r), meaning g(s) = p s^2 + q s + r, and
    covers (b_{i-1}, b_i] with b_0 = -inf and b_{K+1} = +inf. Pieces must agree
    in value at every breakpoint (within 1e-12), every piece must have 2p > 0,
    and the derivative may only jump upward at a breakpoint.
    """

    breakpoints: np.ndarray   # (K,) strictly increasing
    coeffs: np.ndarray        # (K+1, 3) rows (p, q, r)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        cf = np.asarray(self.coeffs, dtype=float)
        if cf.ndim != 2 or cf.shape[1] != 3:
            raise DimensionMismatch(f"coeffs must be (K+1, 3), got {cf.shape}")
        if cf.shape[0] != bp.size + 1:
            raise DimensionMismatch(
                f"{bp.size} breakpoints require {bp.size + 1} pieces, got {cf.shape[0]}"
            )
        if bp.size and not np.all(np.diff(bp) > 0):
            raise DimensionMismatch("breakpoints must be strictly increasing")
        if np.any(2.0 * cf[:, 0] <= 0.0):
            raise NotStronglyConvex("every piece needs second derivative 2p > 0")
        for k, b in enumerate(bp):
            pl, ql, rl = cf[k]
            pr, qr, rr = cf[k + 1]
            left_val = pl * b * b + ql * b + rl
            right_val = pr * b * b + qr * b + rr
            if abs(left_val - right_val) > CONTINUITY_TOL:
                raise NotStronglyConvex(
                    f"discontinuity {left_val - right_val:.3e} at breakpoint {b}"
                )
            dl = 2.0 * pl * b + ql
            dr = 2.0 * pr * b + qr
            if dl > dr + CONTINUITY_TOL:
                raise NotStronglyConvex(
                    f"derivative drops at breakpoint {b} ({dl} -> {dr}); not convex"
                )
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "coeffs", cf)

    @staticmethod
    def quadratic(p: float, q: float = 0.0, r: float = 0.0) -> "PiecewiseScalarFn":
        """Single smooth piece p s^2 + q s + r."""
        return PiecewiseScalarFn(np.empty(0), np.array([[p, q, r]]))

    @property
    def beta(self) -> float:
        """Strong-convexity constant: smallest second derivative over pieces."""
        return float(np.min(2.0 * self.coeffs[:, 0]))

    def piece_index(self, s: float) -> int:
        """Piece covering s; at a breakpoint this is the left piece."""
        return int(np.searchsorted(self.breakpoints, s, side="left"))

    def value(self, s: float) -> float:
        p, q, r = self.coeffs[self.piece_index(s)]
        return float(p * s * s + q * s + r)

    def clarke(self, s: float) -> tuple[float, float]:
        """Generalized-gradient interval at s.

        Degenerate [g, g] inside a piece; [left derivative, right derivative]
        exactly at a breakpoint.
        """
        i = self.piece_index(s)
        p, q, _ = self.coeffs[i]
        lo = 2.0 * p * s + q
        if i < self.breakpoints.size and self.breakpoints[i] == s:
            pr, qr, _ = self.coeffs[i + 1]
            return lo, 2.0 * pr * s + qr
        return lo, lo


class SeparablePiecewise:
    """m piecewise-quadratic coordinates packed into padded arrays.

    Enables vectorized Clarke-interval queries (hot path of the dynamics) and
    exact per-coordinate proximal steps (used by the equilibrium oracle).
    Padding pieces carry an empty interval [+inf, +inf] so they can never win
    a candidate comparison.
    """

    def __init__(self, fns: tuple[PiecewiseScalarFn, ...]):
        self.fns = tuple(fns)
        m = len(fns)
        kmax = max(f.breakpoints.size for f in fns)
        npieces = kmax + 1
        self.m = m
        self.bp = np.full((m, kmax), np.inf)
        self.c2 = np.ones((m, npieces))     # second derivative 2p per piece
        self.q = np.zeros((m, npieces))
        self.r = np.zeros((m, npieces))
        for j, f in enumerate(fns):
            k = f.breakpoints.size
            self.bp[j, :k] = f.breakpoints
            self.c2[j, : k + 1] = 2.0 * f.coeffs[:, 0]
            self.q[j, : k + 1] = f.coeffs[:, 1]
            self.r[j, : k + 1] = f.coeffs[:, 2]
        self.ledge = np.concatenate([np.full((m, 1), -np.inf), self.bp], axis=1)
        self.redge = np.concatenate([self.bp, np.full((m, 1), np.inf)], axis=1)
        # piece 0 of a padded row must still start at -inf; rows with fewer
        # real pieces get ledge = +inf on the padding, which empties them
        self._rows = np.arange(m)
        self.beta = min(f.beta for f in fns)

    def _piece_index(self, y: np.ndarray) -> np.ndarray:
        if self.bp.shape[1] == 0:
            return np.zeros(self.m, dtype=int)
        return (self.bp < y[:, None]).sum(axis=1)

    def clarke(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized interval [glo, ghi] of the generalized gradient at y."""
        idx = self._piece_index(y)
        glo = self.c2[self._rows, idx] * y + self.q[self._rows, idx]
        if self.bp.shape[1] == 0:
            return glo, glo.copy()
        hit = self.bp[self._rows, np.minimum(idx, self.bp.shape[1] - 1)] == y
        ridx = idx + hit
        ghi = self.c2[self._rows, ridx] * y + self.q[self._rows, ridx]
        return glo, np.where(hit, ghi, glo)

    def value(self, y: np.ndarray) -> np.ndarray:
        idx = self._piece_index(y)
        p = 0.5 * self.c2[self._rows, idx]
        return p * y * y + self.q[self._rows, idx] * y + self.r[self._rows, idx]

    def total(self, y: np.ndarray) -> float:
        return float(self.value(y).sum())

    def prox(self, v: np.ndarray, t: float, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """argmin_{u in [lo, hi]} h_j(u) + (u - v_j)^2 / (2t), exactly per coordinate."""
        left = np.maximum(self.ledge, lo[:, None])
        right = np.minimum(self.redge, hi[:, None])
        u = (v[:, None] - t * self.q) / (1.0 + t * self.c2)
        u = np.clip(u, left, right)
        obj = (0.5 * self.c2) * u * u + self.q * u + self.r + (u - v[:, None]) ** 2 / (2.0 * t)
        obj = np.where(left <= right, obj, np.inf)
        best = np.argmin(obj, axis=1)
        return u[self._rows, best]


@dataclass(frozen=True, eq=False, repr=False)
class Problem:
    """Immutable structured instance with derived curvature/rate constants.

    Built by build_problem only. The inner-minimization cache (Cholesky factor
    of H, precomputed maps for the dual gradient) is attached here so repeated
    evaluations along a trajectory stay cheap and the object remains safe to
    share read-only across threads.
    """

    f: QuadraticSmoothFn
    h: tuple[PiecewiseScalarFn, ...]
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    X: BoxSet
    Omega: BoxSet
    alpha: float
    alpha_m: float
    beta: float
    kappa1: float
    gamma: float
    Bt: np.ndarray = field(repr=False)   # contiguous copy of B.T, shared by all paths
    hpack: SeparablePiecewise = field(repr=False)
    # inner-solve cache; fields depend on the X/H structure
    inner_mode: str = field(repr=False)               # "free" | "box_diag" | "box_dense"
    x_base: np.ndarray | None = field(repr=False)     # -H^{-1} c (free), or -c/diag(H)
    dual_map: np.ndarray | None = field(repr=False)   # H^{-1} A' (free), or A'/diag(H)[:,None]
    dual_gram: np.ndarray | None = field(repr=False)  # A H^{-1} A' (free only)
    grad_base: np.ndarray | None = field(repr=False)  # A @ x_base (free only)
    chol: np.ndarray | None = field(repr=False)       # lower Cholesky factor of H

    @property
    def n(self) -> int:
        return self.f.dim

    @property
    def m(self) -> int:
        return len(self.h)

    @property
    def p(self) -> int:
        return self.C.size


def build_problem(f: QuadraticSmoothFn, h, A, B, C, X: BoxSet, Omega: BoxSet) -> Problem:
    """Validate an instance and compute alpha, alpha_m, beta, kappa1, gamma.

    kappa1 is the smallest eigenvalue of A A' (symmetric eigendecomposition);
    the decay-rate constant is gamma = min(2 beta, 2 kappa1 / alpha_m).
    Raises RankDeficient, NotStronglyConvex, DimensionMismatch or
    NonCompactOmega when the structural assumptions fail.
    """
    h = tuple(h)
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    n = f.dim
    m = len(h)
    if m == 0:
        raise DimensionMismatch("h must have at least one component")
    if A.ndim != 2 or B.ndim != 2 or C.ndim != 1:
        raise DimensionMismatch("A, B must be matrices and C a vector")
    p = A.shape[0]
    if A.shape != (p, n):
        raise DimensionMismatch(f"A has shape {A.shape}, expected ({p}, {n})")
    if B.shape != (p, m):
        raise DimensionMismatch(f"B has shape {B.shape}, expected ({p}, {m})")
    if C.shape != (p,):
        raise DimensionMismatch(f"C has shape {C.shape}, expected ({p},)")
    if X.dim != n:
        raise DimensionMismatch(f"X has dimension {X.dim}, expected {n}")
    if Omega.dim != m:
        raise DimensionMismatch(f"Omega has dimension {Omega.dim}, expected {m}")
    if Omega.kind is not SetKind.BOX:
        raise NonCompactOmega("Omega must be a bounded box")

    gram = A @ A.T
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= RANK_RATIO_TOL * max(eigs[-1], 0.0):
        raise RankDeficient(
            f"A A' has eigenvalue ratio {eigs[0]:.3e}/{eigs[-1]:.3e}; A lacks full row rank"
        )
    kappa1 = float(eigs[0])
    beta = min(fj.beta for fj in h)
    gamma = min(2.0 * beta, 2.0 * kappa1 / f.alpha_m)

    if X.kind is SetKind.FREE:
        chol = np.linalg.cholesky(f.H)
        x_base = cholesky_solve(chol, -f.c)
        dual_map = cholesky_solve(chol, A.T)
        mode, dual_gram, grad_base = "free", A @ dual_map, A @ x_base
    elif f.is_diagonal:
        hd = np.diagonal(f.H)
        chol = None
        x_base = -f.c / hd
        dual_map = A.T / hd[:, None]
        mode, dual_gram, grad_base = "box_diag", None, None
    else:
        chol = np.linalg.cholesky(f.H)
        x_base, dual_map, dual_gram, grad_base = None, None, None, None
        mode = "box_dense"

    return Problem(
        f=f, h=h, A=A, B=B, C=C, X=X, Omega=Omega,
        alpha=f.alpha, alpha_m=f.alpha_m, beta=beta, kappa1=kappa1, gamma=gamma,
        Bt=np.ascontiguousarray(B.T), hpack=SeparablePiecewise(h),
        inner_mode=mode, x_base=x_base, dual_map=dual_map,
        dual_gram=dual_gram, grad_base=grad_base, chol=chol,
    )


def clarke_interval(h_j: PiecewiseScalarFn, s: float) -> tuple[float, float]:
    """Interval [g_lo, g_hi] of the generalized gradient of one coordinate at s."""
    return h_j.clarke(float(s))
