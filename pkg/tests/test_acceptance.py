"""Acceptance criteria, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed in
the terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from devbvp import dsl  # noqa: E402
from devbvp.cli import main  # noqa: E402
from devbvp.errors import EvaluationError  # noqa: E402
from devbvp.ivp import IvpSpec, measure_contraction, solve_ivp  # noqa: E402
from devbvp.monotone import extremal_solutions, operator_g  # noqa: E402
from devbvp.problemfile import load  # noqa: E402
from devbvp.quadrature import advance_condition, delay_condition  # noqa: E402
from devbvp.rootfind import greatest_zero, least_zero  # noqa: E402
from devbvp.trajectory import Deviation, Mesh, Trajectory, leq  # noqa: E402
from exprgen import random_env, random_source  # noqa: E402
from oracles import RefError, brute_greatest_zero, brute_least_zero, ref_eval, staircase_brute  # noqa: E402

PROBLEMS = Path(__file__).resolve().parents[1] / "src" / "devbvp" / "problems"
RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str):
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def cli(*argv):
    out = io.StringIO()
    return main([str(a) for a in argv], out=out), out.getvalue()


def csv_columns(path):
    lines = Path(path).read_text().splitlines()
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return lines[0].split(","), data


def const(c):
    return lambda t: c + 0.0 * np.asarray(t, dtype=float)


# ---------------------------------------------------------------- 1


def criterion_1():
    t0 = time.perf_counter()
    spec = IvpSpec(lambda t, x, y: y + 1, Deviation("delay", lambda t: t), 3.0, L2=const(1.0))
    errs = []
    for n in (1024, 2048):
        x, tr = solve_ivp(spec, Mesh.uniform(0, 1, n), tol=1e-10)
        errs.append(float(np.max(np.abs(x.values - (4 * np.exp(x.t) - 1)))))
    dt = time.perf_counter() - t0
    ratio = errs[0] / errs[1]
    ok = errs[0] <= 5e-4 and ratio >= 3.5 and dt < 1.0
    return record(1, ok, f"sup-error {errs[0]:.3e} (<= 5e-4), halving ratio {ratio:.2f} (>= 3.5), {dt:.2f} s (< 1 s)")


# ---------------------------------------------------------------- 2


def criterion_2():
    rng = np.random.default_rng(2024)
    mesh = Mesh.uniform(0, 1, 512)
    tol = 1e-10
    worst_excess, worst_gap = -np.inf, 0.0
    for _ in range(50):
        a1, a2 = rng.uniform(-1.5, 1.5, 2)
        b1, b2 = rng.uniform(0.2, 2.0, 2)
        c, r = rng.uniform(-2, 2), rng.uniform(0.05, 1.0)
        g = lambda t, x, y, a1=a1, a2=a2, b1=b1, b2=b2, c=c: a1 * np.sin(b1 * x) + a2 * np.tanh(b2 * y) + c * t
        l1, l2 = abs(a1 * b1), abs(a2 * b2)
        spec = IvpSpec(g, Deviation("delay", lambda t, r=r: r * t), float(rng.normal()),
                       L1=const(l1), L2=const(l2))
        q = 1 - math.exp(-(l1 + l2))
        u = Trajectory(mesh, rng.normal(0, 5, mesh.points.size))
        v = Trajectory(mesh, rng.normal(0, 5, mesh.points.size))
        worst_excess = max(worst_excess, measure_contraction(spec, mesh, u, v) - q)
        x_hi, _ = solve_ivp(spec, mesh, tol=tol, max_iter=500, x0=Trajectory.constant(100.0, mesh))
        x_lo, _ = solve_ivp(spec, mesh, tol=tol, max_iter=500, x0=Trajectory.constant(-100.0, mesh))
        worst_gap = max(worst_gap, float(np.max(np.abs(x_hi.values - x_lo.values))))
    ok = worst_excess <= 0.01 and worst_gap <= 10 * tol
    return record(2, ok, f"max(ratio - q) {worst_excess:.3e} (<= 0.01), fixed-point gap {worst_gap:.2e} (<= 1e-9)")


# ---------------------------------------------------------------- 3


def _random_coeffs(rng):
    k0, k1, w = rng.uniform(0, 2), rng.uniform(0, 1), rng.uniform(0, 6)
    l0, l1 = rng.uniform(0.1, 2), rng.uniform(0, 2)
    K = lambda t: k0 + k1 * (1 + np.sin(w * t))
    L0 = lambda t: l0 + l1 * np.asarray(t) ** 2
    return K, L0


def criterion_3():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    mesh = Mesh.uniform(0, 1, 512)
    worst = -np.inf
    for kind in ("delay", "advance"):
        for i in range(100):
            K, L0 = _random_coeffs(rng)
            r = rng.uniform(0, 1)
            if kind == "delay":
                tau = Deviation("delay", lambda t, r=r: r * t)
                value = delay_condition(K, L0, tau, 0, 1, n=256).value
            else:
                tau = Deviation("advance", lambda t, r=r: t + r * (1 - t))
                value = advance_condition(K, L0, tau, 0, 1, n=256).value
            scale = rng.uniform(0.2, 1.0) / value
            L = lambda t, L0=L0, scale=scale: scale * L0(t)
            s0, p0 = rng.uniform(0, 1), -rng.uniform(0, 1)
            if i % 4 == 0:  # start on the boundary p = 0
                p0 = 0.0
            slack = lambda t, s0=s0: s0 * (1 + np.cos(3 * t))
            if kind == "delay":
                g = lambda t, x, y, K=K, L=L, slack=slack: -K(t) * x - L(t) * y - slack(t)
                anchor = "start"
            else:
                g = lambda t, x, y, K=K, L=L, slack=slack: K(t) * x + L(t) * y + slack(t)
                anchor = "end"
            spec = IvpSpec(g, tau, p0, anchor=anchor, L1=K, L2=L)
            p, _ = solve_ivp(spec, mesh, tol=1e-12, max_iter=500)
            worst = max(worst, float(np.max(p.values)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 10.0
    return record(3, ok, f"max p over 200 instances {worst:.3e} (<= 1e-9), {dt:.2f} s (< 10 s)")


# ---------------------------------------------------------------- 4


def criterion_4(tmp: Path):
    t0 = time.perf_counter()
    code_check, text = cli("check", PROBLEMS / "ex1.problem", "--report", tmp / "ex1_check.json")
    cond = json.loads((tmp / "ex1_check.json").read_text())["condition"]["value"]
    check_ok = code_check == 0 and 0.45 <= cond <= 0.55
    csv_path, rep_path = tmp / "ex1.csv", tmp / "ex1_solve.json"
    code_solve, _ = cli("solve", PROBLEMS / "ex1.problem", "--csv", csv_path, "--report", rep_path, "--mesh", 1024)
    rep = json.loads(rep_path.read_text())
    solve_ok = False
    if code_solve == 0:
        _, d = csv_columns(csv_path)
        t, lo, hi = d[:, 0], d[:, 3], d[:, 4]
        inside = np.all(lo >= -1e-8) and np.all(hi <= t + 1e-8) and np.all(lo <= hi + 1e-8)
        bres = max(abs(lo[-1] - lo[0] - 0.5), abs(hi[-1] - hi[0] - 0.5))
        dres = max(rep["solution"]["differential_residuals"])
        solve_ok = bool(inside and bres <= 1e-6 and dres <= 1e-3)
        solve_detail = f"solve exit 0, boundary residual {bres:.2e}, differential residual {dres:.2e}"
    else:
        solve_detail = f"solve exit {code_solve} ({rep.get('error', '')})"
    dt = time.perf_counter() - t0
    ok = check_ok and solve_ok and dt < 30
    return record(4, ok, f"check exit {code_check}, condition {cond:.8f} in [0.45, 0.55]; {solve_detail}; {dt:.2f} s")


# ---------------------------------------------------------------- 5


def criterion_5(tmp: Path):
    t0 = time.perf_counter()
    bcsv, brep = tmp / "ex2_bounds.csv", tmp / "ex2_bounds.json"
    code_b, _ = cli("bounds", PROBLEMS / "ex2.problem", "--csv", bcsv, "--report", brep)
    _, d = csv_columns(bcsv)
    t, a, b = d[:, 0], d[:, 2], d[:, 3]
    err = max(np.max(np.abs(a - (2 - 4 * np.exp(t)))), np.max(np.abs(b - (4 * np.exp(t) - 2))))
    slack = json.loads(brep.read_text())["slack_alpha"]
    closed = 3 - (4 * math.e - 5) / 8 - 7 / 8
    scsv, srep = tmp / "ex2.csv", tmp / "ex2.json"
    code_s, _ = cli("solve", PROBLEMS / "ex2.problem", "--csv", scsv, "--report", srep)
    _, s = csv_columns(scsv)
    inside = bool(np.all(s[:, 1] <= s[:, 3] + 1e-8) and np.all(s[:, 3] <= s[:, 4] + 1e-8) and np.all(s[:, 4] <= s[:, 2] + 1e-8))
    bres = max(json.loads(srep.read_text())["solution"]["boundary_residuals"])
    dt = time.perf_counter() - t0
    ok = code_b == 0 and err <= 5e-4 and abs(slack - closed) <= 1e-3 and abs(slack - 1.3909) <= 1e-3 \
        and code_s == 0 and inside and bres <= 1e-6 and dt < 30
    return record(5, ok, f"bounds sup-error {err:.2e}, slack {slack:.6f} (closed form {closed:.6f}); "
                         f"solve exit {code_s}, inside {inside}, boundary residual {bres:.2e}; {dt:.2f} s")


# ---------------------------------------------------------------- 6


def criterion_6():
    tol = 1e-8
    rng = np.random.default_rng(6)
    notes, ok = [], True
    for name in ("trivial", "ex2", "advance_linear"):
        pf = load(PROBLEMS / f"{name}.problem")
        prob, mesh = pf.problem(), pf.mesh(512)
        if pf.constructive:
            from devbvp.bounds import construct

            alpha, beta, _, _ = construct(pf.bounds_spec(), mesh)
        else:
            alpha, beta = pf.explicit_bounds(mesh)
        g_ok = True
        for _ in range(20):
            th = np.sort(rng.uniform(0, 1, (2, mesh.points.size)), axis=0)
            lo = Trajectory(mesh, alpha.values + th[0] * (beta.values - alpha.values))
            hi = Trajectory(mesh, alpha.values + th[1] * (beta.values - alpha.values))
            g_ok &= leq(operator_g(lo, prob, alpha, beta, tol), operator_g(hi, prob, alpha, beta, tol), 10 * tol)
        sol = extremal_solutions(prob, alpha, beta, tol=tol, keep_chains=True)
        up = all(leq(p, q, 10 * tol) for p, q in zip(sol.chains["least"], sol.chains["least"][1:]))
        down = all(leq(q, p, 10 * tol) for p, q in zip(sol.chains["greatest"], sol.chains["greatest"][1:]))
        order = leq(sol.least, sol.greatest, 10 * tol)
        good = bool(g_ok and up and down and order)
        ok &= good
        notes.append(f"{name} {'ok' if good else 'BAD'} ({len(sol.chains['least']) - 1}/{len(sol.chains['greatest']) - 1} steps)")
    return record(6, ok, "; ".join(notes))


# ---------------------------------------------------------------- 7


def criterion_7():
    suite = {
        "monotone cubic": (lambda v: 4 * (v - 0.3) ** 3 + 0.1 * (v - 0.3), 0.0, 1.0),
        "downward step": (lambda v: np.where(v < 0.55, v - 0.2, v - 0.8), 0.0, 1.0),
        "step without exact zero": (lambda v: np.where(v < 0.5, v - 0.45, v - 0.55), 0.0, 1.0),
        "staircase": (lambda v: (v - 0.035) - 0.09 * np.floor(10 * v), 0.0, 1.0),
        "flat zero set": (lambda v: np.clip(v - 0.25, None, 0) + np.clip(v - 0.75, 0, None), 0.0, 1.0),
    }
    tol = 1e-10
    worst = 0.0
    for name, (h, a, b) in suite.items():
        worst = max(worst, abs(greatest_zero(h, a, b, tol=tol) - brute_greatest_zero(h, a, b, tol=tol)))
        worst = max(worst, abs(least_zero(h, a, b, tol=tol) - brute_least_zero(h, a, b, tol=tol)))
    pf = load(PROBLEMS / "ex2_explicit.problem")
    B = dsl.compile_boundary(pf.expr("boundary", "B"))
    mesh = pf.mesh()
    alpha, beta = pf.explicit_bounds(mesh)
    lo, hi = alpha.values[0], beta.values[0]
    anchor_a = greatest_zero(lambda v: B(v, alpha), lo, hi)
    anchor_b = greatest_zero(lambda v: B(v, beta), lo, hi)
    err_a = abs(anchor_a - (0.75 - math.e / 2))
    err_b = abs(anchor_b - (math.e / 2 - 0.75))
    ok = worst <= tol and err_a <= 1e-8 and err_b <= 1e-8
    return record(7, ok, f"max |fast - brute| {worst:.2e} over {len(suite)} functions (<= {tol:g}); "
                         f"ex2 anchor {anchor_a:.10f} (error {err_a:.1e}), {anchor_b:.10f} (error {err_b:.1e})")


# ---------------------------------------------------------------- 8


def criterion_8():
    rng = np.random.default_rng(8)
    mismatches, roundtrip_bad, errors_agreed = 0, 0, 0
    for _ in range(50):
        src = random_source(rng)
        e = dsl.parse(src, "rhs")
        again = dsl.parse(dsl.to_source(e), "rhs")
        roundtrip_bad += again.root != e.root
        for _ in range(20):
            env = random_env(rng)
            try:
                want = ref_eval(src, env)
            except RefError:
                try:
                    dsl.evaluate(e, **env)
                    mismatches += 1
                except EvaluationError:
                    errors_agreed += 1
                continue
            try:
                got = dsl.evaluate(e, **env)
            except EvaluationError:
                mismatches += 1
                continue
            mismatches += np.float64(got).tobytes() != np.float64(want).tobytes()
    x = np.random.default_rng(88).uniform(0, 1, 10_000)
    phi = dsl.parse("if(x >= 0, if(x < 1, x/2 - (1 - 1/floor(1/(1-x))), 1), 1)", "comparison")
    got = np.array([dsl.evaluate(phi, x=float(v)) for v in x])
    stair_bad = int(np.sum(got != staircase_brute(x)))
    ok = mismatches == 0 and roundtrip_bad == 0 and stair_bad == 0
    return record(8, ok, f"round-trip failures {roundtrip_bad}/50, eval mismatches {mismatches}/1000 "
                         f"({errors_agreed} agreed domain errors), staircase mismatches {stair_bad}/10000")


# ---------------------------------------------------------------- pytest entry points


def test_criterion_1_closed_form_ivp():
    assert criterion_1(), RESULTS[1]


def test_criterion_2_contraction_certificate():
    assert criterion_2(), RESULTS[2]


def test_criterion_3_maximum_principle():
    assert criterion_3(), RESULTS[3]


def test_criterion_4_ex1_end_to_end(tmp_path):
    assert criterion_4(tmp_path), RESULTS[4]


def test_criterion_5_ex2_end_to_end(tmp_path):
    assert criterion_5(tmp_path), RESULTS[5]


def test_criterion_6_monotone_engine():
    assert criterion_6(), RESULTS[6]


def test_criterion_7_root_finder_oracle():
    assert criterion_7(), RESULTS[7]


def test_criterion_8_dsl_conformance():
    assert criterion_8(), RESULTS[8]


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        runs = [criterion_1, criterion_2, criterion_3, lambda: criterion_4(Path(d)),
                lambda: criterion_5(Path(d)), criterion_6, criterion_7, criterion_8]
        for fn in runs:
            fn()
    for n in sorted(RESULTS):
        print(RESULTS[n])
    sys.exit(0 if all("PASS" in v for v in RESULTS.values()) else 1)
