import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from devbvp.cli import main
from oracles import pantograph


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def variant(tmp_path, problems, name, *edits, out="variant.problem"):
    text = (problems / f"{name}.problem").read_text()
    for old, new in edits:
        assert old in text
        text = text.replace(old, new)
    path = tmp_path / out
    path.write_text(text)
    return path


def test_check_ex1(problems):
    code, text = run("check", problems / "ex1.problem")
    assert code == 0
    assert "integral = 0.4926997" in text


def test_check_ex1_L_tripled(tmp_path, problems):
    path = variant(tmp_path, problems, "ex1", ("L = sin(t)", "L = 3*sin(t)"))
    code, text = run("check", path)
    assert code == 1
    assert "integral = 1.478099" in text and "NOT satisfied" in text


def test_deviation_out_of_range(tmp_path, problems):
    path = variant(tmp_path, problems, "trivial", ("tau = t", "tau = t + 1"))
    assert run("check", path)[0] == 2
    assert run("solve", path)[0] == 2


def test_solve_ex1_hypothesis_abort(tmp_path, problems):
    rep = tmp_path / "r.json"
    code, _ = run("solve", problems / "ex1.problem", "--report", rep)
    assert code == 3
    data = json.loads(rep.read_text())
    assert data["exit_code"] == 3 and data["violation"]["node"] == 0.0


def test_solve_ex2(tmp_path, problems):
    out = tmp_path / "o.csv"
    rep = tmp_path / "r.json"
    code, text = run("solve", problems / "ex2.problem", "--csv", out, "--report", rep, "--trace")
    assert code == 0
    head, data = read_csv(out)
    assert head == ["t", "alpha", "beta", "x_least", "x_greatest"]
    t, a, b, lo, hi = data.T
    assert np.all(a <= lo + 1e-7) and np.all(lo <= hi + 1e-7) and np.all(hi <= b + 1e-7)
    report = json.loads(rep.read_text())
    assert max(report["solution"]["boundary_residuals"]) < 1e-6
    assert report["defaults"]["mesh_n"] == 1024 and report["defaults"]["scan_n"] == 4096
    assert report["solution"]["traces"]["least"]["weighted_deltas"]


def test_solve_trivial(tmp_path, problems):
    out = tmp_path / "o.csv"
    assert run("solve", problems / "trivial.problem", "--csv", out)[0] == 0
    _, data = read_csv(out)
    assert np.all(np.abs(data[:, 3] - 1) < 1e-7) and np.all(np.abs(data[:, 4] - 1) < 1e-7)


def test_solve_refuses_failed_check_unless_forced(tmp_path, problems):
    path = variant(tmp_path, problems, "trivial", ("L = 0", "L = 2"))
    code, text = run("solve", path)
    assert code == 1 and "--force" in text
    assert run("solve", path, "--force")[0] == 0


def test_solve_nonconvergence(tmp_path, problems):
    path = variant(tmp_path, problems, "ex2_explicit", ("beta = 4*exp(t) - 2", "beta = 4*exp(t) - 2\n[numerics]\nmax_iter = 3"))
    assert run("solve", path)[0] == 1


def test_bounds_ex2(tmp_path, problems):
    out = tmp_path / "b.csv"
    code, text = run("bounds", problems / "ex2.problem", "--csv", out)
    assert code == 0 and "slack_alpha = 1.39086" in text
    head, data = read_csv(out)
    assert head == ["t", "w", "alpha", "beta"]
    assert data[0, 2] == -2.0 and data[0, 3] == 2.0


def test_bounds_small_m(tmp_path, problems):
    path = variant(tmp_path, problems, "ex2", ("m = 3", "m = 0.1"))
    code, text = run("bounds", path)
    assert code == 1 and "slack_alpha = -" in text


def test_bounds_zero_functional(tmp_path, problems):
    path = variant(tmp_path, problems, "ex2", ("phi = integral()/8", "phi = 0"), ("m = 3", "m = 1"))
    rep = tmp_path / "r.json"
    assert run("bounds", path, "--report", rep)[0] == 0
    assert json.loads(rep.read_text())["slack_alpha"] == 0.0


def test_bounds_needs_construct(problems):
    assert run("bounds", problems / "trivial.problem")[0] == 2


def test_ivp_columns(tmp_path, problems):
    out = tmp_path / "x.csv"
    assert run("ivp", problems / "ivp_exp.problem", "--csv", out)[0] == 0
    _, d = read_csv(out)
    assert np.max(np.abs(d[:, 1] - (4 * np.exp(d[:, 0]) - 1))) < 5e-4
    assert run("ivp", problems / "ivp_const.problem", "--csv", out)[0] == 0
    _, d = read_csv(out)
    assert np.all(d[:, 1] == 7.0)
    assert run("ivp", problems / "ivp_half.problem", "--csv", out, "--mesh", 2048)[0] == 0
    _, d = read_csv(out)
    assert d.shape[0] == 2049
    assert np.max(np.abs(d[:, 1] - pantograph(d[:, 0]))) < 5e-7


def test_ivp_missing_section(problems):
    assert run("ivp", problems / "trivial.problem")[0] == 2


def test_csv_format(tmp_path, problems):
    out = tmp_path / "x.csv"
    run("ivp", problems / "ivp_exp.problem", "--csv", out)
    raw = out.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    line = raw.split(b"\n")[5].decode()
    t, x = line.split(",")
    assert float(x) == float("%.17g" % float(x))
    assert len(x.replace("-", "").replace(".", "").lstrip("0").split("e")[0]) <= 17


def test_determinism(tmp_path, problems):
    blobs = []
    for k in range(2):
        out, rep = tmp_path / f"o{k}.csv", tmp_path / f"r{k}.json"
        run("solve", problems / "ex2.problem", "--csv", out, "--report", rep)
        blobs.append((out.read_bytes(), rep.read_bytes().replace(b"o1.csv", b"o0.csv")))
    assert blobs[0] == blobs[1]


def test_gnuplot_and_plot(tmp_path, problems):
    out, gp, png = tmp_path / "o.csv", tmp_path / "o.gp", tmp_path / "o.png"
    assert run("solve", problems / "trivial.problem", "--csv", out, "--gnuplot", gp, "--plot", png)[0] == 0
    script = gp.read_text()
    assert "set datafile separator ','" in script and script.count("using 1:") == 4
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert run("ivp", problems / "ivp_exp.problem", "--gnuplot", gp)[0] == 2


@pytest.mark.parametrize("argv", [["check"], ["nonsense", "x"], ["check", "x", "--mesh", "many"]])
def test_usage_errors(argv):
    assert run(*argv)[0] == 2


def test_input_errors(tmp_path, problems):
    assert run("check", tmp_path / "missing.problem")[0] == 2
    bad = variant(tmp_path, problems, "trivial", ("f = 0", "f = (x"))
    assert run("check", bad)[0] == 2
    assert run("check", problems / "trivial.problem", "--mesh", 1)[0] == 2
    assert run("ivp", problems / "ivp_exp.problem", "--tol", -1)[0] == 2
    err = variant(tmp_path, problems, "trivial", ("beta = 2", "beta = log(t - 2)"))
    assert run("check", err)[0] == 2


def test_console_script(problems):
    proc = subprocess.run(
        [sys.executable, "-m", "devbvp.cli", "check", str(problems / "trivial.problem")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and "all checks passed" in proc.stdout
