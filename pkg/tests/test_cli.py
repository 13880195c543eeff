import json
import math
import subprocess
import sys
import time

import pytest

from notrade import closed_forms as cf
from notrade.cli import main
from notrade.gaussian import gauss_sf


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_csv(tmp_path, capsys):
    out = tmp_path / "path.csv"
    code, _, _ = run(["simulate", "--alpha", "0", "--eta", "1", "--steps", "100", "--seed", "7",
                      "--out", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x,x_smooth,y,w"
    assert len(lines) == 101
    first = lines[1].split(",")
    # alpha = 0: smoothing is the identity
    assert first[1] == first[2]
    manifest = json.loads((tmp_path / "path.csv.manifest.json").read_text())
    assert manifest["master_seed"] == 7 and manifest["command"] == "simulate"
    again = tmp_path / "again.csv"
    run(["simulate", "--alpha", "0", "--eta", "1", "--steps", "100", "--seed", "7",
         "--out", str(again)], capsys)
    assert again.read_bytes() == out.read_bytes()


def test_simulate_seed_from_env(monkeypatch, capsys):
    monkeypatch.setenv("SEED", "7")
    _, env_out, _ = run(["simulate", "--steps", "20"], capsys)
    _, flag_out, _ = run(["simulate", "--steps", "20", "--seed", "7"], capsys)
    _, other, _ = run(["simulate", "--steps", "20", "--seed", "8"], capsys)
    assert env_out == flag_out != other
    monkeypatch.setenv("SEED", "abc")
    assert run(["simulate"], capsys)[0] == 2


def test_simulate_validation(capsys):
    code, _, err = run(["simulate", "--alpha", "1.5"], capsys)
    assert code == 2
    assert "[0, 0.99]" in err
    assert run(["simulate", "--steps", "1"], capsys)[0] == 2
    assert run(["simulate", "--rho", "1"], capsys)[0] == 2
    assert run([], capsys)[0] == 2


def test_simulate_figure(tmp_path, capsys):
    fig = tmp_path / "path.png"
    code, _, _ = run(["simulate", "--steps", "300", "--figure", str(fig)], capsys)
    assert code == 0 and fig.stat().st_size > 0


def test_analytic_round_trip(capsys):
    code, out, _ = run(["analytic", "--eta", "1", "--rho", "0.1"], capsys)
    assert code == 0
    doc = json.loads(out)
    data = doc["data"]
    assert float(data["constrained_second_derivative"]) < 0
    assert float(data["K_axis"]) == cf.K_axis(1.0, 0.1)
    assert float(data["grad_H"]["d_alpha"]) == cf.grad_H_at0(1.0).d_alpha
    assert float(data["hess_K"]["d_aa"]) == cf.hess_K_at0(1.0, 0.1).d_aa
    lam = float(data["lambda"])
    assert abs(lam - cf.lagrange_lambda(1.0, 0.1)) <= 1e-15 * abs(lam)
    assert "manifest" in doc


def test_analytic_lambda_null_at_zero(capsys):
    code, out, _ = run(["analytic", "--eta", "0"], capsys)
    data = json.loads(out)["data"]
    assert code == 0
    assert data["lambda"] is None and data["lambda_reason"]


def test_contour_single_cell(capsys):
    code, out, _ = run(["contour", "--alpha-min", "0", "--alpha-max", "0", "--alpha-steps", "1",
                        "--eta-min", "1", "--eta-max", "1", "--eta-steps", "1"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "alpha,eta,H,status"
    alpha, eta, H, status = lines[1].split(",")
    assert status == "ok" and abs(float(H) - 6.3030) < 5e-5


def test_contour_empty_grid(capsys):
    assert run(["contour", "--alpha-steps", "0"], capsys)[0] == 2
    assert run(["contour", "--eta-min", "2", "--eta-max", "1"], capsys)[0] == 2


def test_contour_default_grid(tmp_path, capsys):
    out = tmp_path / "h.csv"
    fig = tmp_path / "h.png"
    code, _, _ = run(["contour", "--out", str(out), "--figure", str(fig), "--workers", "2"],
                     capsys)
    assert code == 0
    rows = [line.split(",") for line in out.read_text().splitlines()[1:]]
    assert len(rows) == 17 * 20
    assert all(r[3] == "ok" for r in rows)
    for a, e, H, _ in rows:
        if float(a) == 0.0:
            assert abs(float(H) - 1 / gauss_sf(float(e))) < 1e-6
    manifest = json.loads((tmp_path / "h.csv.manifest.json").read_text())
    assert manifest["errors"] == [] and manifest["monotonicity_flags"] == []
    assert fig.stat().st_size > 0


def test_improvement(capsys):
    t0 = time.perf_counter()
    code, out, _ = run(["improvement"], capsys)
    assert time.perf_counter() - t0 < 1.0
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "alpha,eta,R" and len(lines) == 82
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    assert all(r[2] == 0.0 for r in rows if r[0] == 0.0)
    code, out, _ = run(["improvement", "--alpha-min", "0.2", "--alpha-max", "0.2",
                        "--alpha-steps", "1", "--eta-min", "1", "--eta-max", "1",
                        "--eta-steps", "1"], capsys)
    R = float(out.splitlines()[1].split(",")[2])
    assert abs(R - cf.improvement_ratio(0.2, 1.0)) <= 1e-12


def test_improvement_cold_process_under_a_second():
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "notrade", "improvement"], capture_output=True)
    assert proc.returncode == 0
    # includes interpreter start-up and imports
    assert time.perf_counter() - t0 < 3.0


def test_verify_tiny_budget(capsys):
    code, out, err = run(["verify", "--budget", "0.0001", "--gates", "2,3,7"], capsys)
    data = json.loads(out)["data"]
    statuses = {g["number"]: g["status"] for g in data["gates"]}
    assert statuses == {2: "UNDERPOWERED", 3: "UNDERPOWERED", 7: "PASS"}
    assert code == 1
    assert "UNDERPOWERED" in err


def test_verify_validation(capsys):
    assert run(["verify", "--sigma", "50"], capsys)[0] == 2
    assert run(["verify", "--sigma", "0.1"], capsys)[0] == 2
    assert run(["verify", "--budget", "0"], capsys)[0] == 2
    assert run(["verify", "--gates", "12"], capsys)[0] == 2
    assert run(["verify", "--level", "0.5", "--rho", "0.1"], capsys)[0] == 2


def test_verify_fast_gates_pass(capsys):
    code, out, _ = run(["verify", "--gates", "1,5,6,7,9,10"], capsys)
    assert code == 0
    assert json.loads(out)["data"]["all_passed"] is True


def test_verify_failure_named(capsys, monkeypatch):
    from notrade import verify

    def broken(s):
        return verify.GateResult(7, "Lagrange gates", verify.FAIL)

    monkeypatch.setitem(verify.GATES, 7, broken)
    code, _, err = run(["verify", "--gates", "7"], capsys)
    assert code == 1 and "gate  7 Lagrange gates: FAIL" in err


def test_json_numbers_are_strings(capsys):
    _, out, _ = run(["analytic"], capsys)
    data = json.loads(out)["data"]
    assert isinstance(data["H"], str)
    assert not math.isnan(float(data["H"]))
