"""Desk-scale voltage-control case on a radial feeder.

Seven controllable buses regulate reactive power q to pull voltages U toward
nominal: minimize (a/2)||U - 1||^2 plus a kinked per-bus regulation cost,
subject to the linearized feeder model B_net U = q + C and box limits on q.
The feeder sensitivity matrix is synthesized as a tridiagonal
second-difference line-graph matrix with positive off-diagonals, rescaled so
its smallest eigenvalue is 0.1165; published network data beyond that
eigenvalue, the cost weight a = 8, C, and the kVar limits are not needed for
any of the certified quantities.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import ConvergenceReport, certify_envelope, envelope_series, equilibrium_oracle
from .dynamics import IntegratorConfig, State, Trajectory, integrate
from .errors import CertificationFailed
from .model import BoxSet, PiecewiseScalarFn, Problem, QuadraticSmoothFn, build_problem

N_BUSES = 7
MIN_EIGENVALUE = 0.1165
Q_LIMITS_KVAR = np.array([80.0, 80.0, 88.0, 80.0, 104.0, 80.0, 96.0])
KVA_BASE = 100.0
C_DEFAULT = np.array([1.011, -0.009, -0.1, 0.14, -0.26, -0.019, -0.06])
A_DEFAULT = 8.0
COST_KINK = 0.2


def radial_feeder_matrix(n_buses: int = N_BUSES, min_eigenvalue: float = MIN_EIGENVALUE) -> np.ndarray:
    """Tridiagonal (1, 2, 1) line-graph matrix rescaled to the target lambda_min."""
    T = 2.0 * np.eye(n_buses) + np.diag(np.ones(n_buses - 1), 1) + np.diag(np.ones(n_buses - 1), -1)
    return (min_eigenvalue / np.linalg.eigvalsh(T)[0]) * T


def regulation_cost() -> PiecewiseScalarFn:
    """Per-bus reactive regulation cost: 0.5 q^2 inside |q| <= 0.2, q^2 - 0.02 outside."""
    return PiecewiseScalarFn(
        np.array([-COST_KINK, COST_KINK]),
        np.array([[1.0, 0.0, -0.02], [0.5, 0.0, 0.0], [1.0, 0.0, -0.02]]),
    )


@dataclass(frozen=True, eq=False)
class FeederSpec:
    """Feeder data in per-unit (kVar limits divided by the 100 kVA base)."""

    n_buses: int = N_BUSES
    q_hi: np.ndarray = field(default_factory=lambda: Q_LIMITS_KVAR / KVA_BASE)
    q_lo: np.ndarray = field(default_factory=lambda: -Q_LIMITS_KVAR / KVA_BASE)
    C: np.ndarray = field(default_factory=lambda: C_DEFAULT.copy())
    a: float = A_DEFAULT
    B_net: np.ndarray = field(default_factory=radial_feeder_matrix)

    def __post_init__(self):
        if self.B_net.shape != (self.n_buses, self.n_buses):
            raise ValueError(f"B_net must be {self.n_buses}x{self.n_buses}")
        lam_min = float(np.linalg.eigvalsh(0.5 * (self.B_net + self.B_net.T))[0])
        if abs(lam_min - MIN_EIGENVALUE) > 1e-6:
            raise ValueError(
                f"lambda_min(B_net) = {lam_min:.8f}, expected {MIN_EIGENVALUE} within 1e-6"
            )
        if not np.array_equal(self.q_lo, -self.q_hi):
            raise ValueError("reactive limits must be symmetric (q_lo = -q_hi)")
        if self.C.shape != (self.n_buses,) or self.a <= 0:
            raise ValueError("C must have one entry per bus and a must be positive")


def default_feeder() -> FeederSpec:
    return FeederSpec()


def build_case(feeder: FeederSpec | None = None) -> Problem:
    """Map the feeder data onto the generic structured problem.

    x = U (free), y = q in the box, A = B_net, B = -I, C as given; the smooth
    cost is (a/2)||U - 1||^2 and each h_j is the kinked regulation cost.
    """
    fs = feeder or default_feeder()
    n = fs.n_buses
    f = QuadraticSmoothFn(fs.a * np.eye(n), -fs.a * np.ones(n), 0.5 * fs.a * n)
    h = [regulation_cost() for _ in range(n)]
    return build_problem(
        f, h, fs.B_net, -np.eye(n), fs.C,
        BoxSet.free(n), BoxSet.box(fs.q_lo, fs.q_hi),
    )


def case_config(tau: float, **overrides) -> IntegratorConfig:
    defaults = dict(dt=1e-3, tau=tau, t_end=50.0, stop_tol=1e-8, record_every=100)
    defaults.update(overrides)
    return IntegratorConfig(**defaults)


def run_case(
    tau: float,
    cfg: IntegratorConfig | None = None,
    out_dir=None,
    feeder: FeederSpec | None = None,
    problem: Problem | None = None,
) -> tuple[Trajectory, ConvergenceReport, list[Path]]:
    """Integrate the case from q(0) = 0, lam(0) = 0, certify, and export.

    Writes trajectory_tau<tau>.csv, envelope_tau<tau>.csv and
    report_tau<tau>.json under out_dir when given. Raises CertificationFailed
    if any recorded q leaves its box or the decay envelope is violated.
    """
    P = problem if problem is not None else build_case(feeder)
    cfg = cfg or case_config(tau)
    traj = integrate(P, State(np.zeros(P.m), np.zeros(P.p)), cfg)
    eq = equilibrium_oracle(P)
    report = certify_envelope(P, traj, eq)

    inv_ok = bool(
        np.all(traj.y >= P.Omega.lo - 1e-9) and np.all(traj.y <= P.Omega.hi + 1e-9)
    )
    if not inv_ok:
        raise CertificationFailed("a recorded q sample violates its box beyond 1e-9")
    if not report.envelope_ok:
        raise CertificationFailed(
            f"decay envelope violated (margin {report.envelope_margin:.3e})"
        )

    files: list[Path] = []
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        tag = f"{cfg.tau:g}"
        traj_path = out / f"trajectory_tau{tag}.csv"
        traj.write_csv(traj_path)
        env_path = out / f"envelope_tau{tag}.csv"
        t, bound, dist = envelope_series(P, traj, eq)
        with open(env_path, "w", encoding="utf-8") as fh:
            fh.write("t,bound,distance\n")
            for k in range(t.size):
                fh.write(f"{t[k]:.17g},{bound[k]:.17g},{dist[k]:.17g}\n")
        rep_path = out / f"report_tau{tag}.json"
        report.write_json(rep_path)
        files = [traj_path, env_path, rep_path]
    return traj, report, files


def run_sweep(taus, out_dir=None, feeder: FeederSpec | None = None, **config_overrides):
    """Run several tau values concurrently over one shared problem instance.

    config_overrides are forwarded to case_config (dt, t_end, method, ...).
    """
    P = build_case(feeder)
    with ThreadPoolExecutor(max_workers=max(1, len(taus))) as pool:
        futures = [
            pool.submit(run_case, tau, case_config(tau, **config_overrides), out_dir, None, P)
            for tau in taus
        ]
        return [f.result() for f in futures]
