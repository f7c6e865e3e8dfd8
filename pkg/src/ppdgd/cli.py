"""Command-line interface.

Subcommands: validate (structural assumptions and rate constants), run
(integrate a problem file), certify (integrate + equilibrium oracle +
envelope certificate), casestudy (the feeder demo, with repeatable --tau).

Exit codes: 0 success, 2 problem-file parse error, 3 assumption failure,
4 integration failure, 5 certification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import casestudy as cs
from .analysis import certify_envelope, envelope_series, equilibrium_oracle
from .dynamics import IntegratorConfig, Method, State, integrate
from .errors import (
    CertificationFailed,
    DimensionMismatch,
    EquilibriumUnverified,
    InitialPointOutsideOmega,
    InnerSolveDiverged,
    NonCompactOmega,
    NonFiniteState,
    NotStronglyConvex,
    OracleFailed,
    PointOutsideSet,
    ProblemFormatError,
    RankDeficient,
)
from .model import Problem, SetKind
from .problem_io import dump_problem, load_problem

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_ASSUMPTION = 3
EXIT_INTEGRATION = 4
EXIT_CERTIFICATION = 5

_ASSUMPTION_ERRORS = (RankDeficient, NotStronglyConvex, NonCompactOmega, DimensionMismatch)
_INTEGRATION_ERRORS = (
    InitialPointOutsideOmega, NonFiniteState, InnerSolveDiverged, PointOutsideSet,
)
_METHODS = {"euler": Method.PROJECTED_EULER, "rk4": Method.TANGENT_RK4}


def _load(path: str) -> Problem:
    try:
        return load_problem(path)
    except (ProblemFormatError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)
    except _ASSUMPTION_ERRORS as exc:
        print(f"assumption failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_ASSUMPTION)


def _feasible(P: Problem, tol: float = 1e-6) -> bool:
    """Probe whether Ax + By = C admits a solution over X x Omega."""
    if P.X.kind is SetKind.FREE:
        return True  # A has full row rank, so x alone reaches any right-hand side
    import scipy.optimize  # deferred: keeps `validate` startup fast

    M = np.hstack([P.A, P.B])
    lo = np.concatenate([P.X.lo, P.Omega.lo])
    hi = np.concatenate([P.X.hi, P.Omega.hi])
    res = scipy.optimize.lsq_linear(M, P.C, bounds=(lo, hi))
    gap = float(np.max(np.abs(M @ res.x - P.C)))
    return gap <= tol * max(1.0, float(np.max(np.abs(P.C))))


def _cmd_validate(args) -> int:
    P = _load(args.problem)
    for name, value in (
        ("alpha", P.alpha), ("alpha_m", P.alpha_m), ("beta", P.beta),
        ("kappa1", P.kappa1), ("gamma", P.gamma),
    ):
        print(f"{name} = {value!r}")
    # construction already enforced the curvature/rank/compactness assumptions
    print("check smooth_strongly_convex: pass")
    print("check nonsmooth_strongly_convex: pass")
    print("check full_row_rank: pass")
    print("check omega_compact: pass")
    feasible = _feasible(P)
    print(f"check feasible: {'pass' if feasible else 'fail'}")
    return EXIT_OK if feasible else EXIT_ASSUMPTION


def _config_from(args, tau: float) -> IntegratorConfig:
    return IntegratorConfig(
        method=_METHODS[args.method],
        dt=args.dt,
        tau=tau,
        t_end=args.t_end,
        stop_tol=args.stop_tol,
        record_every=args.record_every,
    )


def _initial_state(P: Problem, seed) -> State:
    if seed is None:
        y0 = np.zeros(P.m)
    else:
        rng = np.random.default_rng(seed)
        y0 = rng.uniform(P.Omega.lo, P.Omega.hi)
    return State(y0, np.zeros(P.p))


def _cmd_run(args) -> int:
    P = _load(args.problem)
    cfg = _config_from(args, args.tau)
    try:
        traj = integrate(P, _initial_state(P, args.seed), cfg)
    except _INTEGRATION_ERRORS as exc:
        print(f"integration failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trajectory.csv"
    traj.write_csv(path)
    print(f"samples = {len(traj)}")
    print(f"t_final = {traj.t[-1]!r}")
    print(f"drift_final = {traj.drift_norm[-1]!r}")
    print(f"terminated_by = {traj.terminated_by.value}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_certify(args) -> int:
    P = _load(args.problem)
    cfg = _config_from(args, args.tau)
    try:
        traj = integrate(P, _initial_state(P, args.seed), cfg)
    except _INTEGRATION_ERRORS as exc:
        print(f"integration failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    try:
        eq = equilibrium_oracle(P)
        report = certify_envelope(P, traj, eq)
    except (OracleFailed, EquilibriumUnverified) as exc:
        print(f"certification failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traj.write_csv(out / "trajectory.csv")
    t, bound, dist = envelope_series(P, traj, eq)
    with open(out / "envelope.csv", "w", encoding="utf-8") as fh:
        fh.write("t,bound,distance\n")
        for k in range(t.size):
            fh.write(f"{t[k]:.17g},{bound[k]:.17g},{dist[k]:.17g}\n")
    report.write_json(out / "report.json")
    invariant = bool(
        np.all(traj.y >= P.Omega.lo - 1e-9) and np.all(traj.y <= P.Omega.hi + 1e-9)
    )
    print(f"envelope_ok = {report.envelope_ok}")
    print(f"invariance_ok = {invariant}")
    print(f"gamma_bound = {report.gamma_bound!r}")
    print(f"fitted_rate = {report.fitted_rate!r}")
    print(f"wrote {out / 'trajectory.csv'}, {out / 'envelope.csv'}, {out / 'report.json'}")
    if not (report.envelope_ok and invariant):
        return EXIT_CERTIFICATION
    return EXIT_OK


def _cmd_casestudy(args) -> int:
    taus = args.tau or [1.0]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    P = cs.build_case()
    dump_problem(P, out / "problem.json")
    try:
        results = cs.run_sweep(
            taus, out_dir=out,
            dt=args.dt, t_end=args.t_end, method=_METHODS[args.method],
            stop_tol=args.stop_tol, record_every=args.record_every,
        )
    except _INTEGRATION_ERRORS as exc:
        print(f"integration failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except (OracleFailed, EquilibriumUnverified, CertificationFailed) as exc:
        print(f"certification failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    for tau, (traj, report, files) in zip(taus, results):
        print(
            f"tau = {tau:g}: envelope_ok = {report.envelope_ok}, "
            f"exponent = {0.5 * report.gamma_bound * tau!r}, "
            f"fitted_rate = {report.fitted_rate!r}, samples = {len(traj)}"
        )
    print(f"wrote outputs under {out}")
    return EXIT_OK


def _add_run_flags(sp, tau_repeatable: bool, record_default: int = 1):
    sp.add_argument("--dt", type=float, default=1e-3)
    if tau_repeatable:
        sp.add_argument("--tau", type=float, action="append",
                        help="may be given several times for a sweep")
    else:
        sp.add_argument("--tau", type=float, default=1.0)
    sp.add_argument("--t-end", type=float, default=50.0, dest="t_end")
    sp.add_argument("--method", choices=sorted(_METHODS), default="euler")
    sp.add_argument("--stop-tol", type=float, default=1e-8, dest="stop_tol")
    sp.add_argument("--record-every", type=int, default=record_default,
                    dest="record_every")
    sp.add_argument("--out", default=".")
    sp.add_argument("--seed", type=int, default=None,
                    help="draw y(0) uniformly in Omega (default: y(0) = 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppdgd",
        description="Projected partial primal-dual gradient dynamics solver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="check assumptions and print rate constants")
    sp.add_argument("problem")
    sp.set_defaults(func=_cmd_validate)

    sp = sub.add_parser("run", help="integrate a problem file")
    sp.add_argument("problem")
    _add_run_flags(sp, tau_repeatable=False)
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("certify", help="integrate and certify the decay envelope")
    sp.add_argument("problem")
    _add_run_flags(sp, tau_repeatable=False)
    sp.set_defaults(func=_cmd_certify)

    sp = sub.add_parser("casestudy", help="run the feeder voltage-control case")
    _add_run_flags(sp, tau_repeatable=True, record_default=100)
    sp.set_defaults(func=_cmd_casestudy)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_PARSE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
