"""Right-hand side and fixed-step integration of the projected dynamics.

The flow keeps y inside Omega by construction: the default scheme steps along
the raw drift -g - B'lam and re-projects onto the box (the discrete analogue
of the normal-cone form of the inclusion), while the RK4 variant integrates
the tangent-projected field and re-projects the result as a safeguard. The
subgradient g is the minimal-norm selection: the target -B'lam clamped into
the generalized-gradient interval, which reproduces sliding along kinks and
makes the discrete flow deterministic.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InitialPointOutsideOmega, NonFiniteState
from .geometry import ACTIVITY_TOL, tangent_project
from .inner import _grad_phi, solve_inner
from .model import Problem


class Method(enum.Enum):
    PROJECTED_EULER = "euler"
    TANGENT_RK4 = "rk4"


class TerminationReason(enum.Enum):
    TIME_LIMIT = "time_limit"
    STOP_TOL = "stop_tol"


@dataclass(frozen=True)
class State:
    """Point of the flow: y in Omega, multiplier lam, time t."""

    y: np.ndarray
    lam: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class IntegratorConfig:
    method: Method = Method.PROJECTED_EULER
    dt: float = 1e-3
    tau: float = 1.0
    t_end: float = 10.0
    stop_tol: float = 1e-8
    record_every: int = 1

    def __post_init__(self):
        if self.dt <= 0 or self.tau <= 0 or self.t_end <= 0:
            raise ValueError("dt, tau and t_end must be positive")
        if self.stop_tol < 0:
            raise ValueError("stop_tol must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass(eq=False)
class Trajectory:
    """Recorded samples (t, y, lam, drift_norm); drift_norm is tau-normalized."""

    t: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    drift_norm: np.ndarray
    config: IntegratorConfig
    terminated_by: TerminationReason

    def __len__(self) -> int:
        return self.t.size

    def final_state(self) -> State:
        return State(self.y[-1].copy(), self.lam[-1].copy(), float(self.t[-1]))

    def write_csv(self, path) -> None:
        m = self.y.shape[1]
        p = self.lam.shape[1]
        cols = ["t"] + [f"y_{j + 1}" for j in range(m)] \
            + [f"lambda_{i + 1}" for i in range(p)] + ["drift_norm"]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            for k in range(self.t.size):
                row = [self.t[k], *self.y[k], *self.lam[k], self.drift_norm[k]]
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def select_subgradient(P: Problem, y, lam) -> np.ndarray:
    """Minimal-norm selection from the generalized gradient of h at y.

    Componentwise clamp of the target -(B'lam)_j into the interval; at smooth
    points this reduces to the unique derivative, and when the target lies
    strictly inside a kink interval the corresponding drift component is
    exactly zero (sliding mode).
    """
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    target = -(P.Bt @ lam)
    glo, ghi = P.hpack.clarke(y)
    return np.clip(target, glo, ghi)


def rhs(P: Problem, s: State, tau: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Field of the tau-scaled dynamics at state s.

    dy = tau * tangent-cone projection of (-g - B'lam) at y, and
    dlam = tau * (grad phi(lam) + B y - C). Raises PointOutsideSet when
    s.y is not in Omega.
    """
    g = select_subgradient(P, s.y, s.lam)
    raw = -g - P.Bt @ s.lam
    dy = tau * tangent_project(s.y, raw, P.Omega)
    dlam = tau * (solve_inner(P, s.lam).grad_phi + P.B @ s.y - P.C)
    return dy, dlam


def _drift_lipschitz_estimate(P: Problem) -> float:
    curv = float(np.max(P.hpack.c2))
    nB = float(np.linalg.norm(P.B, 2))
    nA2 = float(np.linalg.norm(P.A, 2)) ** 2
    return curv + 2.0 * nB + nA2 / P.alpha


def integrate(P: Problem, s0: State, cfg: IntegratorConfig) -> Trajectory:
    """Integrate the projected dynamics from s0 with a fixed step.

    Records the initial condition, every record_every-th accepted step and
    the final state. Terminates at cfg.t_end or as soon as the
    tau-normalized field norm drops to cfg.stop_tol. Raises
    InitialPointOutsideOmega or NonFiniteState (step size too large).
    """
    y = np.asarray(s0.y, dtype=float).copy()
    lam = np.asarray(s0.lam, dtype=float).copy()
    if y.shape != (P.m,) or lam.shape != (P.p,):
        raise InitialPointOutsideOmega(
            f"state shapes {y.shape}/{lam.shape}, expected ({P.m},)/({P.p},)"
        )
    if not P.Omega.contains(y):
        raise InitialPointOutsideOmega("y(0) violates Omega beyond 1e-9")

    lip = _drift_lipschitz_estimate(P)
    if cfg.dt * cfg.tau * lip >= 1.0:
        warnings.warn(
            f"dt*tau*L = {cfg.dt * cfg.tau * lip:.3g} >= 1 with drift Lipschitz "
            f"estimate L = {lip:.3g}; the step may be too large",
            stacklevel=2,
        )

    lo, hi = P.Omega.lo, P.Omega.hi
    lo_act, hi_act = lo + ACTIVITY_TOL, hi - ACTIVITY_TOL
    B, Bt = P.B, P.Bt
    hp = P.hpack
    bp, bp_ext, c2m, qm, rows = hp.bp, hp.redge, hp.c2, hp.q, hp._rows
    nbp = bp.shape[1]
    mode = P.inner_mode
    if mode == "free":
        dual_gram = P.dual_gram
        lam_shift = P.C - P.grad_base
    elif mode == "box_diag":
        x_base, dual_map, xlo, xhi, A_ = P.x_base, P.dual_map, P.X.lo, P.X.hi, P.A
    dtau = cfg.dt * cfg.tau
    t0 = float(s0.t)
    n_steps = max(0, math.ceil((cfg.t_end - t0) / cfg.dt - 1e-12))
    euler = cfg.method is Method.PROJECTED_EULER

    def unit_field(yv, lamv):
        bt = Bt @ lamv
        if nbp:
            idx = (bp < yv[:, None]).sum(1)
            g = c2m[rows, idx] * yv + qm[rows, idx]
            hit = bp_ext[rows, idx] == yv
            if hit.any():
                ridx = idx + hit
                ghi = c2m[rows, ridx] * yv + qm[rows, ridx]
                g = np.minimum(np.maximum(-bt, g), ghi)
        else:
            g = c2m[:, 0] * yv + qm[:, 0]
        raw = -g - bt
        dy = np.where(yv <= lo_act, np.maximum(0.0, raw), raw)
        dy = np.where(yv >= hi_act, np.minimum(0.0, dy), dy)
        if mode == "free":
            dlam = B @ yv - dual_gram @ lamv - lam_shift
        elif mode == "box_diag":
            x = np.minimum(np.maximum(x_base - dual_map @ lamv, xlo), xhi)
            dlam = A_ @ x + B @ yv - P.C
        else:
            dlam = _grad_phi(P, lamv) + B @ yv - P.C
        return raw, dy, dlam

    ts: list[float] = []
    ys: list[np.ndarray] = []
    lams: list[np.ndarray] = []
    drifts: list[float] = []

    def record(t, drift):
        ts.append(t)
        ys.append(y.copy())
        lams.append(lam.copy())
        drifts.append(drift)

    k = 0
    t = t0
    with np.errstate(over="ignore", invalid="ignore"):  # blow-up raises NonFiniteState
        while True:
            raw, dy_u, dlam_u = unit_field(y, lam)
            drift = math.sqrt(float(dy_u @ dy_u) + float(dlam_u @ dlam_u))
            if not math.isfinite(drift):
                raise NonFiniteState(f"non-finite state at t = {t}; reduce dt")
            recorded = k % cfg.record_every == 0
            if recorded:
                record(t, drift)
            if drift <= cfg.stop_tol:
                reason = TerminationReason.STOP_TOL
                break
            if k >= n_steps:
                reason = TerminationReason.TIME_LIMIT
                break
            if euler:
                y = np.minimum(np.maximum(y + dtau * raw, lo), hi)
                lam = lam + dtau * dlam_u
            else:
                half = 0.5 * dtau
                k1y, k1l = dy_u, dlam_u
                _, k2y, k2l = unit_field(np.clip(y + half * k1y, lo, hi), lam + half * k1l)
                _, k3y, k3l = unit_field(np.clip(y + half * k2y, lo, hi), lam + half * k2l)
                _, k4y, k4l = unit_field(np.clip(y + dtau * k3y, lo, hi), lam + dtau * k3l)
                y = np.clip(y + (dtau / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y), lo, hi)
                lam = lam + (dtau / 6.0) * (k1l + 2.0 * k2l + 2.0 * k3l + k4l)
            k += 1
            t = t0 + k * cfg.dt

    if not recorded:
        record(t, drift)

    return Trajectory(
        t=np.array(ts),
        y=np.array(ys),
        lam=np.array(lams),
        drift_norm=np.array(drifts),
        config=cfg,
        terminated_by=reason,
    )
