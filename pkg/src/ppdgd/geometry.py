"""Euclidean projection and cone queries for boxes.

The tangent-cone projection uses the exact componentwise rule for boxes
(outward components removed at active faces). The finite-difference limit
formula P(y + delta v) - y over delta is kept as an independent oracle for
validating that rule, including configurations with several active faces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, PointOutsideSet
from .model import BoxSet, SetKind

ACTIVITY_TOL = 1e-9
MEMBER_TOL = 1e-9


def _check_dim(v: np.ndarray, S: BoxSet, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (S.dim,):
        raise DimensionMismatch(f"{name} has shape {v.shape}, expected ({S.dim},)")
    return v


def _check_member(y: np.ndarray, S: BoxSet):
    if S.kind is SetKind.BOX:
        viol = max(float(np.max(S.lo - y, initial=0.0)), float(np.max(y - S.hi, initial=0.0)))
        if viol > MEMBER_TOL:
            raise PointOutsideSet(f"point violates the box by {viol:.3e}")


@dataclass(frozen=True)
class ConeQueryResult:
    """Tangent-cone projection plus the active-face index sets it used."""

    projected: np.ndarray
    active_lower: np.ndarray
    active_upper: np.ndarray


def project_box(v, S: BoxSet) -> np.ndarray:
    """Euclidean projection onto S: componentwise clamp (identity for FREE)."""
    v = _check_dim(v, S, "v")
    if S.kind is SetKind.FREE:
        return v.copy()
    return np.clip(v, S.lo, S.hi)


def tangent_cone_projection(y, v, S: BoxSet, tol: float = ACTIVITY_TOL) -> ConeQueryResult:
    """Project direction v onto the tangent cone of S at y (y must lie in S).

    Componentwise: max(0, v_j) at an active lower bound, min(0, v_j) at an
    active upper bound, 0 where lo_j = hi_j, v_j otherwise. Activity is
    detected within tol.
    """
    y = _check_dim(y, S, "y")
    v = _check_dim(v, S, "v")
    if S.kind is SetKind.FREE:
        empty = np.empty(0, dtype=int)
        return ConeQueryResult(v.copy(), empty, empty)
    _check_member(y, S)
    at_lo = y <= S.lo + tol
    at_hi = y >= S.hi - tol
    out = np.where(at_lo, np.maximum(0.0, v), v)
    out = np.where(at_hi, np.minimum(0.0, out), out)
    return ConeQueryResult(out, np.flatnonzero(at_lo), np.flatnonzero(at_hi))


def tangent_project(y, v, S: BoxSet) -> np.ndarray:
    return tangent_cone_projection(y, v, S).projected


def tangent_project_limit(y, v, S: BoxSet, delta: float = 1e-7) -> np.ndarray:
    """Finite-delta limit-formula oracle: (P(y + delta v) - y) / delta."""
    y = _check_dim(y, S, "y")
    v = _check_dim(v, S, "v")
    return (project_box(y + delta * v, S) - y) / delta


def normal_cone_contains(y, w, S: BoxSet, tol: float = ACTIVITY_TOL) -> bool:
    """True iff w lies in the normal cone of S at y (within tol).

    Componentwise: |w_j| <= tol in the interior, w_j <= tol at a lower bound,
    w_j >= -tol at an upper bound, anything where lo_j = hi_j.
    """
    y = _check_dim(y, S, "y")
    w = _check_dim(w, S, "w")
    if S.kind is SetKind.FREE:
        return bool(np.all(np.abs(w) <= tol))
    _check_member(y, S)
    at_lo = y <= S.lo + tol
    at_hi = y >= S.hi - tol
    ok = np.where(at_lo & at_hi, True,
                  np.where(at_lo, w <= tol,
                           np.where(at_hi, w >= -tol, np.abs(w) <= tol)))
    return bool(np.all(ok))
