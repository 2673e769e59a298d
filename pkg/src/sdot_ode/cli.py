"""Command-line front end.

Subcommands:

* ``solve``   one continuation-ODE run, JSON report (optionally a trajectory CSV)
* ``newton``  Newton runs from scaled random initial guesses
* ``sweep``   ODE runs over a list of step sizes, one table row each
* ``trace``   eigenvalue, mass and derivative-norm traces with power-law fits
* ``compare`` ODE and Newton side by side

The exit status is 0 exactly when every solve of the command converged.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import diagnostics, newton, ode
from .linalg import restricted_eigenvalues
from .problem import Problem, builtin_example, exact_solution, load_problem
from .quadrature import default_spec
from .report import SolveReport

__all__ = ["main", "build_parser", "reference_for"]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--example", help="built-in problem id (E0 ... E7)")
    src.add_argument("--spec", type=Path, help="JSON problem file")
    common.add_argument("--p", type=float, help="cost exponent (overrides the problem's)")
    common.add_argument("--b", type=float, help="E4 weight parameter")
    common.add_argument("--alpha", type=float, default=0.125)
    common.add_argument("--beta", type=float, default=0.25)
    common.add_argument("--quad-rtol", type=float, help="quadrature relative tolerance")
    common.add_argument("--raster-res", type=int, help="raster cells per axis (2-d/3-d)")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--out", type=Path, help="output file (directory for trace)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)

    parser = argparse.ArgumentParser(prog="sdot-ode", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="one ODE run")
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--trajectory", type=Path, help="write the trajectory as CSV")

    p = sub.add_parser("newton", parents=[common], help="Newton from scaled random guesses")
    p.add_argument("--guess-scale", type=_floats, default=[0.0],
                   help="comma list; the guess is scale * uniform(0,1)^N")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iters", type=int, default=100)

    p = sub.add_parser("sweep", parents=[common], help="ODE over several step sizes")
    p.add_argument("--dt", type=_floats, default=[1e-1, 1e-2, 1e-3])

    p = sub.add_parser("trace", parents=[common], help="traces and power-law fits")
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--fit-window", type=_floats, help="t0,t1 (default 0.5,1-dt)")
    p.add_argument("--every", type=int, default=1, help="eigen/mass trace decimation")

    p = sub.add_parser("compare", parents=[common], help="ODE and Newton side by side")
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--guess-scale", type=_floats, default=[0.0])
    return parser


def _problem(args) -> tuple[Problem, np.ndarray | None]:
    if args.example:
        params = {}
        if args.p is not None:
            params["p"] = args.p
        if args.b is not None:
            params["b"] = args.b
        prob = builtin_example(args.example, params)
        exact = exact_solution(args.example, params)
    else:
        prob = load_problem(args.spec)
        if args.p is not None:
            prob = prob.with_cost(args.p)
        exact = None
    return prob, reference_for(prob, exact)


def reference_for(problem: Problem, exact=None):
    """Closed-form potential when known, the exact 1-d solution otherwise, else None."""
    if exact is not None:
        return np.asarray(exact, dtype=float)
    if problem.dim == 1:
        return newton.reference_solution_1d(problem)
    return None


def _spec(args, problem: Problem):
    spec = default_spec(problem.dim)
    if args.quad_rtol is not None:
        spec = replace(spec, rel_tol=args.quad_rtol)
    return spec


def _fmt(v, column: str = "") -> str:
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return "NAN"
    if column == "time":
        return f"{v:.3f}"
    if column in ("dt", "guess_scale") and isinstance(v, float):
        return f"{v:g}"
    if isinstance(v, float):
        return f"{v:.4e}"
    return str(v)


def _table(rows: list[dict], columns: list[str]) -> str:
    """Fixed-width text table; missing numbers print as NAN."""
    cells = [[_fmt(r.get(c), c) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _emit_rows(rows: list[dict], columns: list[str], args) -> None:
    print(_table(rows, columns))
    if args.out is None:
        return
    if args.format == "json":
        clean = [{c: (None if isinstance(r.get(c), float) and not math.isfinite(r[c]) else r.get(c))
                  for c in columns} for r in rows]
        args.out.write_text(json.dumps(clean, indent=2))
    else:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(columns)
        for r in rows:
            w.writerow(["" if r.get(c) is None or (isinstance(r[c], float) and not math.isfinite(r[c]))
                        else r[c] for c in columns])
        args.out.write_text(buf.getvalue())


def _ode_row(problem, ref, h, tab, spec, res):
    _, rep = ode.solve_ivp(problem, h, tab, spec, reference=ref, raster_resolution=res)
    return rep


def _report_row(rep: SolveReport, **extra) -> dict:
    row = dict(extra)
    row.update(status=rep.status, error=rep.error, measure_error=rep.measure_error,
               time=round(rep.elapsed, 3), iterations=rep.iterations)
    return row


def cmd_solve(args) -> int:
    prob, ref = _problem(args)
    tab = ode.make_tableau(args.alpha, args.beta)
    traj, rep = ode.solve_ivp(prob, args.dt, tab, _spec(args, prob), reference=ref,
                              raster_resolution=args.raster_res)
    rep.elapsed = round(rep.elapsed, 3)
    text = rep.to_json()
    if args.out:
        args.out.write_text(text)
    print(text)
    if args.trajectory:
        with open(args.trajectory, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"psi_{k}" for k in range(prob.n)] + ["rhs_norm"])
            for t, psi, rec in zip(traj.times, traj.potentials, traj.step_records):
                w.writerow([repr(t)] + [repr(float(v)) for v in psi]
                           + ["" if not math.isfinite(rec.rhs_norm) else repr(rec.rhs_norm)])
    return 0 if rep.converged else 1


def _guesses(n: int, scales, seed: int):
    rng = np.random.default_rng(seed)
    base = rng.random(n)
    return [(s, s * base) for s in scales]


def _newton_rows(prob, ref, args):
    cfg = newton.NewtonConfig(tol=args.tol, max_iters=args.max_iters,
                              raster_resolution=args.raster_res)
    rows, ok = [], True
    for scale, guess in _guesses(prob.n, args.guess_scale, args.seed):
        rep = newton.newton_solve(prob, guess, cfg, reference=ref)
        ok &= rep.converged
        rows.append(_report_row(rep, method="newton", guess_scale=scale))
    return rows, ok


def cmd_newton(args) -> int:
    prob, ref = _problem(args)
    rows, ok = _newton_rows(prob, ref, args)
    _emit_rows(rows, ["guess_scale", "status", "error", "measure_error", "iterations", "time"], args)
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    prob, ref = _problem(args)
    tab = ode.make_tableau(args.alpha, args.beta)
    spec = _spec(args, prob)
    jobs = [(prob, ref, h, tab, spec, args.raster_res) for h in args.dt]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            reps = list(ex.map(_ode_row, *zip(*jobs)))
    else:
        reps = [_ode_row(*j) for j in jobs]
    rows = [_report_row(rep, dt=h) for h, rep in zip(args.dt, reps)]
    _emit_rows(rows, ["dt", "status", "error", "measure_error", "time"], args)
    return 0 if all(r.converged for r in reps) else 1


def cmd_trace(args) -> int:
    prob, _ = _problem(args)
    tab = ode.make_tableau(args.alpha, args.beta)
    spec = _spec(args, prob)
    traj, rep = ode.solve_ivp(prob, args.dt, tab, spec, raster_resolution=args.raster_res)
    window = tuple(args.fit_window) if args.fit_window else (0.5, 1.0 - args.dt)
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)

    series = {
        "rhs_norm": diagnostics.rhs_norm_trace(traj),
        "eigenvalues": diagnostics.eigen_trace(prob, traj, spec, every=args.every),
        "masses": diagnostics.mass_trace(prob, traj, spec, args.raster_res, every=args.every),
    }
    lam_ref = None
    if prob.dim == 1 and traj.complete:
        lam_ref = restricted_eigenvalues(-newton.newton_jacobian_1d(prob, traj.final))
    series["eigenvalue_error"] = diagnostics.eigen_error_trace(series["eigenvalues"], lam_ref)

    fits = {}
    for name in ("rhs_norm", "eigenvalue_error"):
        s = series[name]
        for k, col in enumerate(s.columns):
            try:
                f = diagnostics.power_law_fit(s, window, k)
                fits[col] = {"coefficient": f.coefficient, "exponent": f.exponent,
                             "rms_residual": f.rms_residual, "n_samples": f.n_samples}
            except ValueError as exc:
                fits[col] = {"error": str(exc)}
    for name, s in series.items():
        if args.format == "csv":
            diagnostics.write_csv(s, out / f"{name}.csv")
        else:
            diagnostics.write_json(s, out / f"{name}.json")
    (out / "fits.json").write_text(json.dumps({"window": list(window), "fits": fits}, indent=2))
    for col, f in fits.items():
        if "error" in f:
            print(f"{col}: {f['error']}")
        else:
            print(f"{col}: {f['coefficient']:.5g} (1-t)^{f['exponent']:.5g}  "
                  f"rms log residual {f['rms_residual']:.3g}")
    return 0 if rep.converged else 1


def cmd_compare(args) -> int:
    prob, ref = _problem(args)
    tab = ode.make_tableau(args.alpha, args.beta)
    rep = _ode_row(prob, ref, args.dt, tab, _spec(args, prob), args.raster_res)
    rows = [_report_row(rep, method="ode", guess_scale="-")]
    nrows, ok = _newton_rows(prob, ref, args)
    rows += nrows
    _emit_rows(rows, ["method", "guess_scale", "status", "error", "measure_error",
                      "iterations", "time"], args)
    return 0 if ok and rep.converged else 1


_COMMANDS = {"solve": cmd_solve, "newton": cmd_newton, "sweep": cmd_sweep,
             "trace": cmd_trace, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if hasattr(args, "dt"):
        for h in (args.dt if isinstance(args.dt, list) else [args.dt]):
            if not 0.0 < h < 1.0 or abs(round(1.0 / h) * h - 1.0) > 1e-9:
                print(f"error: dt must be in (0, 1) with 1/dt an integer, got {h}", file=sys.stderr)
                return 2
    try:
        return _COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
