"""Acceptance criteria 1-10 at their stated sizes and tolerances.

Prints one ``criterion N: PASS|FAIL`` line per criterion (in the pytest
terminal summary, or on stdout when run as a script).
"""

import json
import sys

import pytest

from notrade import verify
from notrade.cli import main

RESULTS = {}


@pytest.fixture(scope="module")
def settings():
    return verify.VerifySettings()


def record(number, ok, note=""):
    RESULTS[number] = ("PASS" if ok else "FAIL", note)
    return ok


def check_gate(number, settings):
    try:
        res = verify.run_gate(number, settings)
    except Exception as exc:
        record(number, False, f"{type(exc).__name__}: {exc}")
        raise
    note = f"{res.name}, {res.seconds:.1f}s"
    assert record(number, res.passed, note), json.dumps(verify.to_jsonable(res.detail))


def test_criterion_1_axis_exactness(settings):
    check_gate(1, settings)


def test_criterion_2_K_closed_form_vs_mc(settings):
    check_gate(2, settings)


def test_criterion_3_H_closed_form_vs_mc(settings):
    check_gate(3, settings)


def test_criterion_4_solver_vs_mc(settings):
    check_gate(4, settings)


def test_criterion_5_gradients(settings):
    check_gate(5, settings)


def test_criterion_6_quadrature(settings):
    check_gate(6, settings)


def test_criterion_7_lagrange(settings):
    check_gate(7, settings)


def test_criterion_8_level_curve(settings):
    check_gate(8, settings)


def test_criterion_9_improvement(settings):
    check_gate(9, settings)


def _verify_data(tmp_path, name, workers):
    out = tmp_path / name
    code = main(["verify", "--budget", "0.02", "--seed", "11", "--workers", str(workers),
                 "--out", str(out)])
    doc = json.loads(out.read_text())
    return code, json.dumps(doc["data"], indent=2).encode()


def test_criterion_10_determinism(settings, tmp_path):
    record(10, False, "did not finish")
    internal = verify.run_gate(10, settings)
    _, a = _verify_data(tmp_path, "a.json", 1)
    _, b = _verify_data(tmp_path, "b.json", 1)
    _, c = _verify_data(tmp_path, "c.json", 3)
    ok = internal.passed and a == b == c
    assert record(10, ok, "verify run twice plus worker count 1 vs 3")


def summary_lines():
    return [f"criterion {k}: {RESULTS[k][0]}  ({RESULTS[k][1]})" for k in sorted(RESULTS)]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
