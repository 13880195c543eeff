"""Command-line front end.

Grids go out as CSV with a ``<out>.manifest.json`` sidecar; scalar reports go
out as one JSON object ``{"manifest": ..., "data": ...}`` whose numbers are
round-trip decimal strings.  Exit codes: 0 success, 1 data or verification
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import closed_forms as cf
from . import optimizer, survival, verify
from .errors import NotradeError
from .process import ALPHA_MAX, ModelParams, gen_path
from .rng import RngStream

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
OK_FRACTION = 0.9


class UsageError(Exception):
    pass


# -- argument types --------------------------------------------------------

def _ranged(lo: float, hi: float, lo_open=False, hi_open=False):
    left = "(" if lo_open else "["
    right = ")" if hi_open else "]"

    def parse(text: str) -> float:
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        bad_lo = v <= lo if lo_open else v < lo
        bad_hi = v >= hi if hi_open else v > hi
        if not math.isfinite(v) or bad_lo or bad_hi:
            raise argparse.ArgumentTypeError(
                f"{v:g} outside the valid range {left}{lo:g}, {hi:g}{right}")
        return v

    return parse


def _count(lo: int, hi: int):
    def parse(text: str) -> int:
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if not lo <= v <= hi:
            raise argparse.ArgumentTypeError(f"{v} outside the valid range [{lo}, {hi}]")
        return v

    return parse


_rho = _ranged(0.0, 1.0, lo_open=True, hi_open=True)
_alpha = _ranged(0.0, ALPHA_MAX)
_eta = _ranged(0.0, 8.0)
_seed = _count(0, 2**64 - 1)


def _default_seed() -> int:
    raw = os.environ.get("SEED")
    if raw is None or raw == "":
        return 0
    try:
        return _seed(raw)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"SEED environment variable: {exc}") from None


# -- output helpers ----------------------------------------------------------

def _manifest(command: str, params: dict, seed, started: float, errors=()) -> dict:
    return {
        "command": command,
        "parameters": params,
        "master_seed": seed,
        "version": __version__,
        "wall_time_seconds": round(time.perf_counter() - started, 3),
        "errors": list(errors),
    }


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(verify.fmt(v) if isinstance(v, float) else str(v) for v in row))
        buf.write("\n")
    return buf.getvalue()


def _write(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _emit_csv(header, rows, out: str, manifest: dict) -> None:
    _write(_csv_text(header, rows), out)
    if out != "-":
        _write(json.dumps(manifest, indent=2) + "\n", out + ".manifest.json")


def _emit_json(data: dict, out: str, manifest: dict) -> None:
    doc = {"manifest": manifest, "data": verify.to_jsonable(data)}
    _write(json.dumps(doc, indent=2) + "\n", out)


def _grid(lo: float, hi: float, steps: int, name: str) -> np.ndarray:
    if steps < 1:
        raise UsageError(f"--{name}-steps must be at least 1 (empty grid)")
    if hi < lo:
        raise UsageError(f"--{name}-max must not be below --{name}-min")
    if steps == 1:
        if hi != lo:
            raise UsageError(f"a single-step {name} grid needs --{name}-min == --{name}-max")
        return np.array([lo])
    return np.linspace(lo, hi, steps)


# -- commands ----------------------------------------------------------------

def cmd_simulate(args, started: float) -> int:
    params = ModelParams(rho=args.rho, alpha=args.alpha, eta=args.eta)
    path = gen_path(params, args.steps, RngStream(args.seed))
    rows = ((t, float(path.x[t]), float(path.x_smooth[t]), float(path.y[t]), int(path.w[t]))
            for t in range(len(path)))
    manifest = _manifest("simulate", {"rho": args.rho, "alpha": args.alpha, "eta": args.eta,
                                      "steps": args.steps}, args.seed, started)
    _emit_csv(["t", "x", "x_smooth", "y", "w"], rows, args.out, manifest)
    if args.figure:
        from . import plotting

        plotting.plot_path(path, args.eta, args.figure)
    return EXIT_OK


def analytic_report(eta: float, rho: float) -> dict:
    """Closed-form quantities at alpha = 0 (plain floats, None where undefined)."""
    gK, hK = cf.grad_K_at0(eta, rho), cf.hess_K_at0(eta, rho)
    gH, hH = cf.grad_H_at0(eta), cf.hess_H_at0(eta)
    data = {
        "eta": eta,
        "rho": rho,
        "K_axis": cf.K_axis(eta, rho),
        "grad_K": {"d_alpha": gK.d_alpha, "d_eta": gK.d_eta},
        "hess_K": {"d_aa": hK.d_aa, "d_ae": hK.d_ae, "d_ee": hK.d_ee},
        "H": cf.H_at0(eta),
        "grad_H": {"d_alpha": gH.d_alpha, "d_eta": gH.d_eta},
        "hess_H": {"d_aa": hH.d_aa, "d_ae": hH.d_ae, "d_ee": hH.d_ee},
    }
    if eta == 0.0:
        data["lambda"] = None
        data["lambda_reason"] = "Lagrange multiplier undefined at eta = 0 (grad K vanishes)"
        data["constrained_second_derivative"] = None
    else:
        data["lambda"] = cf.lagrange_lambda(eta, rho)
        data["constrained_second_derivative"] = cf.constrained_second_derivative(eta, rho)
    return data


def cmd_analytic(args, started: float) -> int:
    data = analytic_report(args.eta, args.rho)
    manifest = _manifest("analytic", {"rho": args.rho, "eta": args.eta}, None, started)
    _emit_json(data, args.out, manifest)
    return EXIT_OK


def cmd_contour(args, started: float) -> int:
    alphas = _grid(args.alpha_min, args.alpha_max, args.alpha_steps, "alpha")
    etas = _grid(args.eta_min, args.eta_max, args.eta_steps, "eta")
    if etas[-1] > survival.ETA_MAX:
        raise UsageError(f"--eta-max must not exceed {survival.ETA_MAX:g} for the solver")
    cfg = survival.SolverConfig(n_grid=args.n_grid)
    cells = survival.contour_grid(alphas, etas, cfg, workers=args.workers)
    errors = [{"alpha": c.alpha, "eta": c.eta, "status": c.status, "message": c.message}
              for c in cells if not c.ok]
    flags = survival.monotonicity_flags(cells, len(alphas), len(etas))
    manifest = _manifest("contour", {
        "alpha": [args.alpha_min, args.alpha_max, args.alpha_steps],
        "eta": [args.eta_min, args.eta_max, args.eta_steps],
        "n_grid": args.n_grid, "workers": args.workers}, None, started, errors)
    manifest["monotonicity_flags"] = flags
    rows = ((c.alpha, c.eta, c.H, c.status) for c in cells)
    _emit_csv(["alpha", "eta", "H", "status"], rows, args.out, manifest)
    if args.figure:
        from . import plotting

        plotting.plot_contour(alphas, etas, [c.H for c in cells], args.figure)
    n_ok = sum(c.ok for c in cells)
    return EXIT_OK if n_ok >= OK_FRACTION * len(cells) else EXIT_FAIL


def cmd_improvement(args, started: float) -> int:
    alphas = _grid(args.alpha_min, args.alpha_max, args.alpha_steps, "alpha")
    etas = _grid(args.eta_min, args.eta_max, args.eta_steps, "eta")
    cells = optimizer.improvement_table(alphas, etas)
    manifest = _manifest("improvement", {
        "alpha": [args.alpha_min, args.alpha_max, args.alpha_steps],
        "eta": [args.eta_min, args.eta_max, args.eta_steps]}, None, started)
    manifest["monotonicity_flags"] = optimizer.improvement_violations(
        cells, len(alphas), len(etas))
    _emit_csv(["alpha", "eta", "R"], ((c.alpha, c.eta, c.R) for c in cells), args.out,
              manifest)
    if args.figure:
        from . import plotting

        plotting.plot_improvement(alphas, etas, [c.R for c in cells], args.figure)
    return EXIT_OK


def _parse_gates(text: str | None) -> list[int]:
    if not text:
        return sorted(verify.GATES)
    try:
        gates = sorted({int(g) for g in text.split(",")})
    except ValueError:
        raise UsageError(f"--gates must be a comma-separated list of integers: {text!r}") from None
    unknown = [g for g in gates if g not in verify.GATES]
    if unknown:
        raise UsageError(f"unknown gate(s) {unknown}; valid gates are 1-{len(verify.GATES)}")
    return gates


def verify_data(settings: verify.VerifySettings, results) -> dict:
    return {
        "settings": {"level": settings.level, "rho": settings.rho, "budget": settings.budget,
                     "sigma": settings.sigma},
        "gates": [{"number": r.number, "name": r.name, "status": r.status, "detail": r.detail}
                  for r in results],
        "all_passed": all(r.passed for r in results),
    }


def cmd_verify(args, started: float) -> int:
    gates = _parse_gates(args.gates)
    settings = verify.VerifySettings(level=args.level, rho=args.rho, budget=args.budget,
                                     sigma=args.sigma, seed=args.seed, workers=args.workers)
    results = verify.run_all(settings, gates)
    manifest = _manifest("verify", {
        "level": args.level, "rho": args.rho, "budget": args.budget, "sigma": args.sigma,
        "gates": gates, "workers": args.workers}, args.seed, started)
    manifest["gate_seconds"] = {str(r.number): round(r.seconds, 3) for r in results}
    _emit_json(verify_data(settings, results), args.out, manifest)
    for r in results:
        print(f"gate {r.number:2d} {r.name}: {r.status}", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# -- parser ------------------------------------------------------------------

def _grid_flags(p, alpha=(0.0, 0.8, 17), eta=(0.1, 2.0, 20)) -> None:
    p.add_argument("--alpha-min", type=_alpha, default=alpha[0])
    p.add_argument("--alpha-max", type=_alpha, default=alpha[1])
    p.add_argument("--alpha-steps", type=int, default=alpha[2])
    p.add_argument("--eta-min", type=_eta, default=eta[0])
    p.add_argument("--eta-max", type=_eta, default=eta[1])
    p.add_argument("--eta-steps", type=int, default=eta[2])


def build_parser(default_seed: int) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="notrade", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one signal/return/position path as CSV")
    p.add_argument("--rho", type=_rho, default=0.1)
    p.add_argument("--alpha", type=_alpha, default=0.5)
    p.add_argument("--eta", type=_eta, default=1.0)
    p.add_argument("--steps", type=_count(2, 10**9), default=1000)
    p.add_argument("--seed", type=_seed, default=default_seed)
    p.add_argument("--out", default="-")
    p.add_argument("--figure", help="also save a PNG/PDF plot of the path here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analytic", help="closed-form report at alpha = 0 as JSON")
    p.add_argument("--rho", type=_rho, default=0.1)
    p.add_argument("--eta", type=_eta, default=1.0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("contour", help="expected survival time over an (alpha, eta) grid")
    _grid_flags(p)
    p.add_argument("--n-grid", type=_count(201, 100_001), default=1001,
                   help="minimum solver grid size (rounded up to odd)")
    p.add_argument("--workers", type=_count(1, 256), default=1)
    p.add_argument("--out", default="-")
    p.add_argument("--figure", help="also save a contour plot here")
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("improvement", help="improvement ratio over an (alpha, eta) grid")
    _grid_flags(p, alpha=(0.0, 0.8, 9), eta=(0.2, 1.8, 9))
    p.add_argument("--out", default="-")
    p.add_argument("--figure", help="also save a contour plot here")
    p.set_defaults(func=cmd_improvement)

    p = sub.add_parser("verify", help="run the cross-validation gates")
    p.add_argument("--level", type=_ranged(0.0, 1.0, lo_open=True, hi_open=True),
                   default=verify.DEFAULT_LEVEL)
    p.add_argument("--rho", type=_rho, default=verify.DEFAULT_RHO)
    p.add_argument("--budget", type=_ranged(*verify.BUDGET_RANGE), default=1.0,
                   help="Monte Carlo size relative to nominal (1.0)")
    p.add_argument("--sigma", type=_ranged(*verify.SIGMA_RANGE), default=3.0,
                   help="Monte Carlo acceptance band in standard errors")
    p.add_argument("--gates", help="comma-separated subset of gate numbers")
    p.add_argument("--seed", type=_seed, default=default_seed)
    p.add_argument("--workers", type=_count(1, 256), default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    started = time.perf_counter()
    try:
        parser = build_parser(_default_seed())
    except UsageError as exc:
        print(f"notrade: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if getattr(args, "n_grid", 1) % 2 == 0:
        args.n_grid += 1
    try:
        return args.func(args, started)
    except (UsageError, NotradeError, ValueError) as exc:
        # invalid combinations that argparse cannot see on its own
        print(f"notrade {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE if not isinstance(exc, RuntimeError) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
