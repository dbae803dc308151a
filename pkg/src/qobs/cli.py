"""Command-line front end: ``qobs {check-pr,solve,coherent,simulate} SCENARIO...``."""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import InfeasibleAugmentation, PreconditionError, ScenarioError, SynthesisError
from .estimator import check_estimator_pr, make_coherent_observer
from .filtering import SolveStatus, riccati_trajectory, solve_steady_riccati
from .moments import JointMomentState, optimal_joint, propagate_moments
from .realizability import check_plant_pr
from .scenario import Scenario, load

log = logging.getLogger("qobs")

EXIT_OK = 0
EXIT_NOT_PR = 1
EXIT_PARSE = 2
EXIT_NUMERIC = 3
EXIT_NONCONVERGENT = 4
EXIT_INFEASIBLE = 5

EPILOG = """\
exit codes:
  0  success (check-pr: plant is physically realizable)
  1  plant is not physically realizable
  2  scenario could not be read or parsed
  3  numerical failure
  4  Riccati flow non-convergent, or steady state depends on P0
  5  coherent observer cannot be constructed (infeasible augmentation,
     or A - K C not Hurwitz)

With several scenarios the exit code is the largest one and the report is a
list of per-scenario entries in argument order.

environment:
  QOBS_LOG  logging level on stderr (DEBUG, INFO, WARNING, ...; default WARNING)
"""

SIM_HORIZON = 100.0
SIM_DT = 1e-2


@dataclass
class Outcome:
    code: int
    report: dict | None = None
    csv: str | None = None
    trajectory: str | None = None


def _solver_args(sc: Scenario, args) -> dict:
    cfg = sc.solver
    return {
        "dt": args.dt if args.dt is not None else cfg.dt,
        "horizon": args.horizon if args.horizon is not None else cfg.horizon,
        "tol": args.tol if args.tol is not None else cfg.tol,
    }


def _require_pr(sc: Scenario):
    rep = check_plant_pr(sc.system)
    if not rep.is_realizable:
        return Outcome(EXIT_NOT_PR, {"error": "plant is not physically realizable",
                                     "realizability": rep.to_dict()})
    return None


def _synthesize(sc: Scenario, args):
    return solve_steady_riccati(sc.system, sc.initial_covariance, **_solver_args(sc, args))


def _status_code(status: SolveStatus) -> int:
    return EXIT_OK if status is SolveStatus.CONVERGED else EXIT_NONCONVERGENT


def cmd_check_pr(sc: Scenario, args) -> Outcome:
    rep = check_plant_pr(sc.system)
    return Outcome(EXIT_OK if rep.is_realizable else EXIT_NOT_PR, rep.to_dict())


def cmd_solve(sc: Scenario, args) -> Outcome:
    refused = _require_pr(sc)
    if refused:
        return refused
    syn = _synthesize(sc, args)
    out = Outcome(_status_code(syn.status), syn.to_report())
    if args.trajectory or args.format == "csv":
        buf = io.StringIO()
        syn.write_csv(buf)
        out.trajectory = out.csv = buf.getvalue()
    return out


def cmd_coherent(sc: Scenario, args) -> Outcome:
    refused = _require_pr(sc)
    if refused:
        return refused
    syn = _synthesize(sc, args)
    if syn.status is SolveStatus.NON_CONVERGENT:
        return Outcome(EXIT_NONCONVERGENT, {"error": "Riccati flow did not converge",
                                            "synthesis": syn.to_report()})
    est = check_estimator_pr(sc.system, syn)
    base = {"estimator_realizable": est.is_realizable, "J": syn.J_perf,
            "estimator_residual": est.max_residual}
    if est.is_realizable:
        # nothing to repair: report the estimator itself with an empty coupling
        base.update(K=syn.K_last.tolist(), b=np.zeros((sc.system.n, 0)).tolist(), n_v=0,
                    P_tilde=syn.P_last.tolist(), J_tilde=syn.J_perf, residual_norm=est.max_residual,
                    hurwitz=syn.hurwitz)
        return Outcome(_status_code(syn.status), base)
    solver = _solver_args(sc, args)
    try:
        co = make_coherent_observer(sc.system, syn, n_v=sc.coherent.n_v, **solver)
    except InfeasibleAugmentation as exc:
        return Outcome(EXIT_INFEASIBLE, {**base, "error": str(exc)})
    except PreconditionError as exc:
        return Outcome(EXIT_INFEASIBLE, {**base, "error": str(exc)})
    base.update(co.to_dict())
    code = max(_status_code(syn.status), _status_code(co.synthesis.status))
    return Outcome(code, base)


def cmd_simulate(sc: Scenario, args) -> Outcome:
    s = sc.system
    horizon = args.horizon if args.horizon is not None else SIM_HORIZON
    dt = args.dt if args.dt is not None else SIM_DT
    b = None
    if sc.coherent.enabled:
        refused = _require_pr(sc)
        if refused:
            return refused
        # --dt/--horizon set the simulated window; the observer uses the scenario's solver
        solver = {"dt": sc.solver.dt, "horizon": sc.solver.horizon, "tol": sc.solver.tol}
        syn = solve_steady_riccati(s, sc.initial_covariance, **solver)
        if syn.status is SolveStatus.NON_CONVERGENT:
            return Outcome(EXIT_NONCONVERGENT, {"error": "Riccati flow did not converge"})
        if not check_estimator_pr(s, syn).is_realizable:
            try:
                b = make_coherent_observer(s, syn, n_v=sc.coherent.n_v, **solver).b
            except (InfeasibleAugmentation, PreconditionError) as exc:
                return Outcome(EXIT_INFEASIBLE, {"error": str(exc)})
    P0 = sc.initial_covariance
    traj = propagate_moments(optimal_joint(s, b), None, JointMomentState.from_error_covariance(P0),
                             horizon, dt)
    extra = None if b is None else b @ b.T
    _, Ps = riccati_trajectory(s, P0, horizon, dt, extra_noise=extra)
    errs = traj.error_covariances()
    if Ps.shape != errs.shape:  # pragma: no cover - both record every step
        raise SynthesisError("trajectory grids differ")
    dev = np.maximum.accumulate(np.max(np.abs(errs - Ps), axis=(1, 2)))
    if not np.all(np.isfinite(errs)):
        return Outcome(EXIT_NUMERIC, {"error": "moment propagation produced non-finite values"})
    buf = io.StringIO()
    traj.write_csv(buf, {"max_dev": dev})
    final = errs[-1]
    report = {
        "horizon": horizon,
        "dt": dt,
        "coherent": b is not None,
        "error_covariance": final.tolist(),
        "trace_err": float(np.trace(final)),
        "max_deviation": float(dev[-1]),
    }
    return Outcome(EXIT_OK, report, csv=buf.getvalue())


COMMANDS = {
    "check-pr": (cmd_check_pr, "json", "test the plant's physical realizability identities"),
    "solve": (cmd_solve, "json", "steady-state least-mean-squares estimator"),
    "coherent": (cmd_coherent, "json", "realizable observer by vacuum-noise augmentation"),
    "simulate": (cmd_simulate, "csv", "joint plant/estimator moment trajectory"),
}


def run_one(command: str, path: str, args) -> Outcome:
    fn = COMMANDS[command][0]
    try:
        sc = load(path)
    except ScenarioError as exc:
        return Outcome(EXIT_PARSE, {"error": f"{path}: {exc}"})
    try:
        with np.errstate(over="raise", invalid="raise"):
            return fn(sc, args)
    except (SynthesisError, FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        log.debug("numerical failure", exc_info=True)
        return Outcome(EXIT_NUMERIC, {"error": f"{type(exc).__name__}: {exc}"})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qobs",
        description="Least-mean-squares estimation and coherent observers for linear quantum systems.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, default_fmt, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("scenarios", nargs="+", metavar="SCENARIO", help="scenario JSON file")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--trajectory", help="also write the trajectory CSV here (solve)")
        p.add_argument("--dt", type=float, help="integration step")
        p.add_argument("--horizon", type=float, help="integration horizon")
        p.add_argument("--tol", type=float, help="steady-state tolerance on |dP/dt|")
        p.add_argument("--jobs", type=int, default=1, help="scenarios to run concurrently")
        p.add_argument("--format", choices=("json", "csv"), default=default_fmt)
    return parser


def _render(outcomes, paths, fmt) -> str:
    if fmt == "csv":
        parts = []
        for path, o in zip(paths, outcomes):
            text = o.csv if o.csv is not None else ""
            parts.append(text if len(paths) == 1 else f"# {path}\n{text}")
        return "".join(parts)
    if len(paths) == 1:
        doc = outcomes[0].report
    else:
        doc = [{"scenario": p, "exit_code": o.code, "report": o.report}
               for p, o in zip(paths, outcomes)]
    return json.dumps(doc, indent=2) + "\n"


def main(argv=None) -> int:
    level = os.environ.get("QOBS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    for name in ("dt", "horizon", "tol"):
        v = getattr(args, name)
        if v is not None and not v > 0:
            print(f"qobs: --{name} must be positive", file=sys.stderr)
            return EXIT_PARSE
    if args.jobs < 1:
        print("qobs: --jobs must be at least 1", file=sys.stderr)
        return EXIT_PARSE

    paths = args.scenarios
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        outcomes = list(pool.map(lambda p: run_one(args.command, p, args), paths))

    for path, o in zip(paths, outcomes):
        if o.code == EXIT_PARSE and o.report:
            print(f"qobs: {o.report['error']}", file=sys.stderr)
        if o.code != EXIT_OK:
            log.info("%s: exit %d", path, o.code)

    if args.trajectory:
        trajs = [o.trajectory for o in outcomes if o.trajectory is not None]
        if trajs:
            with open(args.trajectory, "w") as fh:
                fh.write("".join(trajs))
    if args.format == "csv" and all(o.csv is None for o in outcomes):
        # nothing tabular to show (e.g. check-pr); fall back to the JSON report
        text = _render(outcomes, paths, "json")
    else:
        text = _render(outcomes, paths, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return max(o.code for o in outcomes)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
