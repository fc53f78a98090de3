"""Command line interface: ``devbvp check|solve|bounds|ivp FILE [options]``.

Exit codes: 0 success, 1 method or condition failure (failed check,
non-convergence, infeasible bounds), 2 input error, 3 the monotone
iteration aborted because the data break one of its hypotheses.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bounds import check_functional, construct
from .errors import (
    DeviationError,
    DomainError,
    EvaluationError,
    HypothesisViolation,
    InfeasibleBoundsError,
    MeshMismatchError,
    NonConvergenceError,
    PreconditionError,
    ProblemFileError,
)
from .ivp import residual as ivp_residual
from .ivp import solve_ivp
from .monotone import (
    CheckReport,
    ConditionViolation,
    check_one_sided_lipschitz,
    extremal_solutions,
    verify_lower,
    verify_upper,
)
from .problemfile import DEFAULTS, ProblemFile, load, validate_numerics
from .trajectory import Trajectory, default_order_tol, leq

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_HYPOTHESIS = 0, 1, 2, 3

_INPUT_ERRORS = (
    ProblemFileError,
    DeviationError,
    DomainError,
    EvaluationError,
    PreconditionError,
    MeshMismatchError,
    ValueError,
    OSError,
)


class _Run:
    """Collects human-readable lines and the machine-readable report of one invocation."""

    def __init__(self, command: str, args, out=None):
        self.command = command
        self.args = args
        self.out = out or sys.stdout
        self.report: dict = {"command": command, "file": str(args.file), "defaults": dict(DEFAULTS)}
        self.checks: list = []

    def say(self, line: str = ""):
        print(line, file=self.out)

    def add_check(self, rep: CheckReport):
        self.checks.append(rep)
        self.say("  " + rep.summary())


# ---------------------------------------------------------------- output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_csv(path, columns: dict):
    """Comma-separated, header row, LF endings, 17 significant digits."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    lines = [",".join(names)]
    lines += [",".join("%.17g" % v for v in row) for row in data]
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def write_gnuplot(path, csv_path, names: list, title: str):
    csv_name = Path(csv_path).as_posix()
    plots = [f"'{csv_name}' using 1:{i + 2} with lines title '{n}'" for i, n in enumerate(names[1:])]
    text = "\n".join(
        [
            f"# {title}",
            "set datafile separator ','",
            "set xlabel 't'",
            "set key left top",
            "set grid",
            "plot " + ", \\\n     ".join(plots),
            "pause mouse close",
            "",
        ]
    )
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


def _emit(run: _Run, columns: Optional[dict], deltas: Optional[dict] = None):
    args = run.args
    if columns is None:
        return
    if args.csv:
        write_csv(args.csv, columns)
        run.say(f"wrote {args.csv}")
    if args.gnuplot:
        write_gnuplot(args.gnuplot, args.csv, list(columns), f"devbvp {run.command}: {run.report.get('problem', '')}")
        run.say(f"wrote {args.gnuplot}")
    if args.plot:
        from .plotting import plot_columns

        cols = {k: v for k, v in columns.items() if k != "t"}
        plot_columns(args.plot, columns["t"], cols, f"{run.command}: {run.report.get('problem', '')}", deltas)
        run.say(f"wrote {args.plot}")


def _write_report(run: _Run, code: int):
    run.report["checks"] = [c.as_dict() for c in run.checks]
    run.report["exit_code"] = code
    if run.args.report:
        with open(run.args.report, "w", newline="\n", encoding="utf-8") as fh:
            json.dump(_jsonable(run.report), fh, indent=2)
            fh.write("\n")


# ---------------------------------------------------------------- commands


def _numerics(pf: ProblemFile, args, tol_key: str) -> dict:
    num = dict(pf.numerics)
    if args.mesh is not None:
        num["mesh_n"] = args.mesh
    if args.tol is not None:
        num[tol_key] = args.tol
    validate_numerics(num)
    return num


def _bounds(pf: ProblemFile, mesh, num: dict, run: _Run):
    """Explicit [bounds] or the [construct] block; returns (alpha, beta, feasible)."""
    if pf.has("bounds", "alpha") and pf.has("bounds", "beta"):
        alpha, beta = pf.explicit_bounds(mesh)
        return alpha, beta, True
    if pf.constructive:
        try:
            alpha, beta, _, rep = construct(pf.bounds_spec(), mesh, tol=num["ivp_tol"])
        except InfeasibleBoundsError as exc:
            if exc.report is not None:
                run.add_check(exc.report)
            else:
                run.add_check(CheckReport("feasibility", False, note=str(exc)))
            return None, None, False
        run.add_check(rep)
        return alpha, beta, True
    raise ProblemFileError("need a [bounds] section with alpha and beta, or a [construct] section")


def _run_checks(pf: ProblemFile, num: dict, run: _Run):
    """All hypothesis checks; returns (passed, prob, alpha, beta)."""
    prob = pf.problem(force=True)
    mesh = pf.mesh(num["mesh_n"])
    cond = prob.condition
    run.say("  " + cond.summary())
    run.report["condition"] = {
        "value": cond.value,
        "threshold": cond.threshold,
        "satisfied": cond.satisfied,
        "estimated_error": cond.estimated_error,
        "marginal": cond.marginal,
        "kind": cond.kind,
        "quad_n": cond.mesh_size,
    }
    ok = bool(cond.satisfied)
    alpha, beta, feasible = _bounds(pf, mesh, num, run)
    ok = ok and feasible
    if alpha is None:
        return ok, prob, None, None
    otol = default_order_tol(alpha, beta)
    order = CheckReport(
        "alpha <= beta",
        leq(alpha, beta, otol),
        {"max(alpha - beta)": float(np.max(alpha.values - beta.values))},
    )
    run.add_check(order)
    run.add_check(verify_lower(alpha, prob, tol=otol))
    run.add_check(verify_upper(beta, prob, tol=otol))
    if order.passed:
        run.add_check(
            check_one_sided_lipschitz(
                prob, alpha, beta, samples=num["lipschitz_samples"], tol=otol, seed=num["seed"]
            )
        )
    if pf.constructive:
        run.add_check(check_functional(pf.bounds_spec().phi, mesh, seed=num["seed"]))
    ok = ok and all(c.passed for c in run.checks)
    return ok, prob, alpha, beta


def cmd_check(pf: ProblemFile, run: _Run) -> int:
    num = _numerics(pf, run.args, "tol")
    run.report["numerics"] = num
    run.say(f"check {pf.name}  [{pf.kind}, interval [{pf.a:g}, {pf.b:g}], mesh_n = {num['mesh_n']}]")
    ok, _, alpha, beta = _run_checks(pf, num, run)
    run.say("all checks passed" if ok else "CHECK FAILED")
    if alpha is not None:
        _emit(run, {"t": alpha.t, "alpha": alpha.values, "beta": beta.values})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_solve(pf: ProblemFile, run: _Run) -> int:
    args = run.args
    num = _numerics(pf, args, "tol")
    run.report["numerics"] = num
    run.report["force"] = bool(args.force)
    run.say(f"solve {pf.name}  [{pf.kind}, mesh_n = {num['mesh_n']}, tol = {num['tol']:g}]")
    if args.force:
        prob = pf.problem(force=True)
        alpha, beta, feasible = _bounds(pf, pf.mesh(num["mesh_n"]), num, run)
        if not feasible:
            run.say("bounds infeasible")
            return EXIT_FAIL
    else:
        ok, prob, alpha, beta = _run_checks(pf, num, run)
        if not ok:
            run.say("CHECK FAILED; not solving (use --force to override)")
            return EXIT_FAIL
    sol = extremal_solutions(
        prob, alpha, beta, tol=num["tol"], max_outer=num["max_iter"], scan_n=num["scan_n"], check=False
    )
    res = sol.as_dict()
    if not args.trace:
        for tr in res["traces"].values():
            tr.pop("weighted_deltas")
    run.report["solution"] = res
    run.report["solution"]["x_least_at_anchor"] = float(sol.least.values[prob.anchor_index(sol.least.mesh)])
    run.report["solution"]["x_greatest_at_anchor"] = float(sol.greatest.values[prob.anchor_index(sol.greatest.mesh)])
    for side, tr in sol.traces.items():
        run.say(f"  {side}: converged in {tr.iterations} steps")
        if args.trace:
            for k, d in enumerate(tr.weighted_deltas, 1):
                run.say(f"    {k:4d}  {d:.6e}")
    run.say(f"  boundary residuals: {sol.boundary_residuals[0]:.3e}, {sol.boundary_residuals[1]:.3e}")
    run.say(
        f"  differential residuals: {sol.differential_residuals[0]:.3e}, {sol.differential_residuals[1]:.3e}"
    )
    run.say(f"  max(x_greatest - x_least) = {float(np.max(sol.greatest.values - sol.least.values)):.6g}")
    cols = {
        "t": alpha.t,
        "alpha": alpha.values,
        "beta": beta.values,
        "x_least": sol.least.values,
        "x_greatest": sol.greatest.values,
    }
    deltas = {k: tr.weighted_deltas for k, tr in sol.traces.items()}
    _emit(run, cols, deltas)
    return EXIT_OK


def cmd_bounds(pf: ProblemFile, run: _Run) -> int:
    if not pf.constructive:
        raise ProblemFileError("bounds needs a [construct] section")
    num = _numerics(pf, run.args, "ivp_tol")
    run.report["numerics"] = num
    spec = pf.bounds_spec()
    run.say(f"bounds {pf.name}  [m = {spec.m:g}, n_alpha = {spec.n_alpha:g}, n_beta = {spec.n_beta:g}]")
    mesh = pf.mesh(num["mesh_n"])
    try:
        alpha, beta, w, rep = construct(spec, mesh, tol=num["ivp_tol"])
    except InfeasibleBoundsError as exc:
        if exc.report is not None:
            run.add_check(exc.report)
        run.say(f"INFEASIBLE: {exc}")
        return EXIT_FAIL
    run.add_check(rep)
    run.report["slack_alpha"] = rep.values["slack_alpha"]
    run.report["slack_beta"] = rep.values["slack_beta"]
    run.say(f"  alpha(a) = {alpha.values[0]:.10g}, beta(a) = {beta.values[0]:.10g}")
    _emit(run, {"t": w.t, "w": w.values, "alpha": alpha.values, "beta": beta.values})
    return EXIT_OK


def cmd_ivp(pf: ProblemFile, run: _Run) -> int:
    args = run.args
    num = _numerics(pf, args, "ivp_tol")
    run.report["numerics"] = num
    spec = pf.ivp_spec()
    mesh = pf.mesh(num["mesh_n"])
    run.say(f"ivp {pf.name}  [anchor = {spec.anchor}, value = {spec.anchor_value:g}, mesh_n = {num['mesh_n']}]")
    x, trace = solve_ivp(spec, mesh, tol=num["ivp_tol"], max_iter=num["ivp_max_iter"])
    res, _ = ivp_residual(x, spec)
    tr = trace.as_dict()
    if not args.trace:
        tr.pop("weighted_deltas")
    run.report["trace"] = tr
    run.report["residual"] = res
    run.say(f"  converged in {trace.iterations} iterations, q = {trace.q_used:.6g}, residual = {res:.3e}")
    if args.trace:
        for k, d in enumerate(trace.weighted_deltas, 1):
            run.say(f"    {k:4d}  {d:.6e}")
    _emit(run, {"t": x.t, "x": x.values}, {"picard": trace.weighted_deltas})
    return EXIT_OK


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "bounds": cmd_bounds, "ivp": cmd_ivp}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="devbvp",
        description="Extremal solutions of boundary value problems with a deviated argument.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{check,solve,bounds,ivp}")
    helps = {
        "check": "verify the hypotheses of the monotone method",
        "solve": "least and greatest solutions between alpha and beta",
        "bounds": "construct alpha and beta from a [construct] block",
        "ivp": "solve the [ivp] section by Picard iteration",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("file", type=Path, help="problem file")
        p.add_argument("--csv", metavar="PATH", help="write the result columns as CSV")
        p.add_argument("--report", metavar="PATH", help="write a JSON report")
        p.add_argument("--mesh", metavar="N", type=int, help=f"mesh intervals (default {DEFAULTS['mesh_n']})")
        p.add_argument("--tol", metavar="X", type=float, help="iteration tolerance")
        p.add_argument("--force", action="store_true", help="skip the implicit hypothesis check")
        p.add_argument("--trace", action="store_true", help="print and record every iteration increment")
        p.add_argument("--gnuplot", metavar="PATH", help="write a gnuplot script for the CSV (needs --csv)")
        p.add_argument("--plot", metavar="PATH", help="render a matplotlib figure (png, pdf, svg)")
    return parser


def main(argv=None, out=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    err = sys.stderr
    if args.gnuplot and not args.csv:
        print("error: --gnuplot needs --csv", file=err)
        return EXIT_INPUT
    run = _Run(args.command, args, out)
    code = EXIT_INPUT
    try:
        pf = load(args.file)
        run.report["problem"] = pf.name
        code = COMMANDS[args.command](pf, run)
    except ConditionViolation as exc:
        run.report["error"] = str(exc)
        print(f"condition failure: {exc}", file=err)
        code = EXIT_FAIL
    except HypothesisViolation as exc:
        run.report["error"] = str(exc)
        run.report["violation"] = {"node": exc.node, "amount": exc.amount}
        print(f"hypothesis violation: {exc}", file=err)
        code = EXIT_HYPOTHESIS
    except (NonConvergenceError, InfeasibleBoundsError) as exc:
        run.report["error"] = str(exc)
        trace = getattr(exc, "trace", None)
        if trace is not None:
            run.report["trace"] = trace.as_dict()
        print(f"failure: {exc}", file=err)
        code = EXIT_FAIL
    except _INPUT_ERRORS as exc:
        run.report["error"] = str(exc)
        print(f"input error: {exc}", file=err)
        code = EXIT_INPUT
    try:
        _write_report(run, code)
    except OSError as exc:
        print(f"input error: cannot write report: {exc}", file=err)
        return EXIT_INPUT
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
