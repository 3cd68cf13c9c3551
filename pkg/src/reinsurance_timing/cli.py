"""Command-line front end.

Subcommands ``solve``, ``sweep``, ``compare`` and ``simulate``. The problem is
read from ``--config`` (JSON) or taken from ``--benchmark``; any parameter can
then be overridden with ``--<name> <value>`` (``--theta 0.6``, ``--K 5``,
``--alpha 3.5``, ``--retention excess_of_loss``...).

Exit codes: 0 success, 2 configuration error, 3 verification failure,
4 Monte Carlo validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Sequence

import numpy as np

from .boundary import CoefficientOutOfRange, solve_policy, verify_variational
from .model import (
    ExcessOfLoss,
    ModelError,
    Problem,
    Proportional,
    benchmark,
    load_problem,
    retention_from_dict,
)
from .numerics import BracketFailure
from .roots import RootError
from .simulator import SimConfig, SimConfigError
from .validation import DEFAULT_PERTURBATIONS, SuiteSpec, validation_suite

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_MC = 0, 2, 3, 4

BENCHMARKS = ("proportional", "proportional_exponential", "xl_exponential", "xl_pareto", "proportional_pareto")
SWEEP_PARAMS = ("rho", "mu", "sigma2", "K", "zeta", "theta", "eta", "lambda")
OVERRIDE_KEYS = ("lambda", "eta", "theta", "rho", "K", "mu", "sigma2", "zeta", "alpha", "premium_base")
SWEEP_SUCCESS_SHARE = 0.9


class ConfigError(Exception):
    """Bad command-line input; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse's own exit code is already 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def g6(v: float) -> str:
    """Human formatting: 6 significant digits."""
    return "-" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6g}"


def csv_num(v) -> str:
    """Shortest round-trip representation; empty for missing values."""
    if v is None:
        return ""
    return repr(float(v))


# --- problem construction ----------------------------------------------------


def _parse_overrides(extra: Sequence[str]) -> dict[str, str]:
    out, i = {}, 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key, _, value = tok[2:].partition("=")
        if not value:
            if i + 1 >= len(extra):
                raise ConfigError(f"override {tok} needs a value")
            value = extra[i + 1]
            i += 1
        key = key.replace("-", "_")
        if key not in OVERRIDE_KEYS + ("retention",):
            raise ConfigError(f"unknown override --{key}")
        out[key] = value
        i += 1
    return out


def build_problem(args, overrides: dict[str, str]) -> Problem:
    problem = load_problem(args.config) if args.config else benchmark(args.benchmark)
    overrides = dict(overrides)
    retention = overrides.pop("retention", None)
    if retention is not None:
        problem = Problem(problem.params, problem.law, retention_from_dict({"type": retention}))
    values = {}
    for key, raw in overrides.items():
        if key == "premium_base":
            values[key] = raw
            continue
        try:
            values[key] = float(raw)
        except ValueError:
            raise ConfigError(f"--{key} expects a number, got {raw!r}") from None
    return problem.replace(**values) if values else problem


def _params_comment(problem: Problem) -> str:
    return f"# params: {problem.canonical_json()}\n"


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(problem: Problem, header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    buf.write(_params_comment(problem))
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def _say(args, *lines: str) -> None:
    if not args.quiet:
        for line in lines:
            print(line)


# --- solve --------------------------------------------------------------------


def cmd_solve(args, problem: Problem) -> int:
    try:
        sol = solve_policy(problem)
    except (RootError, BracketFailure, CoefficientOutOfRange) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    report = verify_variational(sol)
    doc = sol.to_json()
    doc["verification"] = {
        "passed": report.passed,
        "clauses": {c.name: {"passed": c.passed, "worst": c.worst, "tolerance": c.tolerance} for c in report.clauses},
    }
    doc["params"] = problem.to_dict()
    if args.out:
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    elif args.json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    lines = [
        f"retention   {problem.retention.name}",
        f"case        {sol.case}",
        f"b_star      {g6(sol.b_star)}",
        f"x_star      {'absent' if sol.never_reinsure else g6(sol.x_star)}",
        f"gamma-(b*)  {g6(sol.gamma_minus_bstar)}",
        f"gamma-(1)   {g6(sol.gamma_minus_1)}",
        f"gamma+(1)   {g6(sol.gamma_plus_1)}",
    ]
    if not sol.never_reinsure:
        lines += [f"C1          {g6(sol.C1)}", f"C2          {g6(sol.C2)}", f"B           {g6(sol.B)}", f"H           {g6(sol.H)}"]
    lines += ["", "verification:"] + ["  " + s for s in report.lines()]
    if not args.json or args.out:
        _say(args, *lines)
    return EXIT_OK if report.passed else EXIT_VERIFY


# --- sweep --------------------------------------------------------------------


def _param_value(problem: Problem, name: str) -> float:
    p = problem.params
    direct = {"rho": p.rho, "K": p.K, "theta": p.theta, "eta": p.eta, "lambda": p.lam}
    if name in direct:
        return direct[name]
    if not hasattr(problem.law, name):
        raise ConfigError(f"claim law {type(problem.law).__name__} has no parameter {name!r}")
    return float(getattr(problem.law, name))


def default_grid(problem: Problem, name: str, n: int = 21) -> np.ndarray:
    """``n`` points within +-50% of the current value, clipped to stay admissible."""
    v = _param_value(problem, name)
    lo, hi = 0.5 * v, 1.5 * v
    if name == "theta":
        lo = max(lo, problem.params.eta + 0.05 * (v - problem.params.eta))
    elif name == "eta":
        hi = min(hi, problem.params.theta - 0.05 * (problem.params.theta - v))
    elif name == "sigma2":
        lo = max(lo, problem.mu**2)
    elif name == "mu" and hasattr(problem.law, "sigma2"):
        top = math.sqrt(problem.law.sigma2)
        while top * top > problem.law.sigma2:  # keep sigma2 >= mu^2 after rounding
            top = math.nextafter(top, 0.0)
        hi = min(hi, top)
    return np.linspace(lo, hi, n)


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def sweep_grid(problem: Problem, args) -> np.ndarray:
    if args.values:
        return np.array(_parse_floats(args.values))
    if args.grid:
        parts = _parse_floats(args.grid)
        if len(parts) != 3 or parts[2] < 2 or parts[2] != int(parts[2]):
            raise ConfigError("--grid expects lo,hi,n with integer n >= 2")
        return np.linspace(parts[0], parts[1], int(parts[2]))
    return default_grid(problem, args.param, args.points)


def sweep_rows(problem: Problem, param: str, grid, value_at: Sequence[float]):
    """Yield ``(value, row cells, error)`` for each grid point, in grid order."""
    for v in grid:
        try:
            sol = solve_policy(problem.replace(**{param: float(v)}))
            x_star = sol.x_star if math.isfinite(sol.x_star) else math.inf
            cells = [param, csv_num(v), csv_num(sol.b_star), csv_num(x_star)]
            cells += [csv_num(sol.U(x)) for x in value_at]
            yield v, cells, None
        except (ModelError, RootError, BracketFailure, CoefficientOutOfRange, ValueError) as exc:
            yield v, [param, csv_num(v), "", ""] + [""] * len(value_at), exc


def cmd_sweep(args, problem: Problem) -> int:
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"--param must be one of {', '.join(SWEEP_PARAMS)}")
    _param_value(problem, args.param)
    grid = sweep_grid(problem, args)
    value_at = _parse_floats(args.value_at) if args.value_at else []
    header = ["param", "value", "b_star", "x_star"] + [f"U_at_{x:g}" for x in value_at]
    rows, failed = [], 0
    for v, cells, err in sweep_rows(problem, args.param, grid, value_at):
        rows.append(cells)
        if err is not None:
            failed += 1
            print(f"warning: {args.param}={float(v)!r}: {err}", file=sys.stderr)
    _emit(_csv_text(problem, header, rows), args.out)
    ok = len(rows) - failed
    if args.out:
        _say(args, f"wrote {len(rows)} rows ({failed} failed) to {args.out}")
    return EXIT_OK if ok >= SWEEP_SUCCESS_SHARE * len(rows) else EXIT_VERIFY


# --- compare ------------------------------------------------------------------


def _load_slot(path: str | None, base: Problem, retention) -> Problem:
    if path:
        return load_problem(path)
    return Problem(base.params, base.law, retention)


def compare_table(prop: Problem, xl: Problem, xs) -> tuple[list[list[float]], str]:
    for name, a, b in (("mu", prop.mu, xl.mu), ("sigma2", prop.sigma2, xl.sigma2)):
        if not math.isclose(a, b, rel_tol=1e-12):
            raise ConfigError(f"the two configs imply different {name}: {a} vs {b}")
    sp, sx = solve_policy(prop), solve_policy(xl)
    up, ux = np.asarray(sp.U(xs)), np.asarray(sx.U(xs))
    diff = up - ux
    rows = [[float(x), float(a), float(b), float(d)] for x, a, b, d in zip(xs, up, ux, diff)]
    if np.all(diff <= 0.0):
        summary = "diff <= 0 on the whole grid (proportional is cheaper or equal)"
    elif np.all(diff >= 0.0):
        summary = "diff >= 0 on the whole grid (excess-of-loss is cheaper or equal)"
    else:
        summary = "diff changes sign on the grid (no uniform comparison)"
    return rows, summary


def cmd_compare(args, problem: Problem, overrides) -> int:
    prop = _load_slot(args.proportional, problem, Proportional())
    xl = _load_slot(args.excess_of_loss, problem, ExcessOfLoss())
    if args.proportional and overrides:
        prop = build_problem(argparse.Namespace(config=args.proportional, benchmark=None), overrides)
    if args.excess_of_loss and overrides:
        xl = build_problem(argparse.Namespace(config=args.excess_of_loss, benchmark=None), overrides)
    lo, hi, n = args.x_grid
    xs = np.linspace(lo, hi, int(n))
    rows, summary = compare_table(prop, xl, xs)
    text = _csv_text(prop, ["x", "U_proportional", "U_excess_of_loss", "diff"], [[csv_num(v) for v in r] for r in rows])
    _emit(text, args.out)
    _say(args, summary) if args.out else print(f"# {summary}", file=sys.stderr)
    return EXIT_OK


def _x_grid(text: str):
    parts = [float(t) for t in text.split(",")]
    if len(parts) != 3 or parts[2] < 2:
        raise argparse.ArgumentTypeError("expected lo,hi,n")
    return parts


# --- simulate -----------------------------------------------------------------


def cmd_simulate(args, problem: Problem) -> int:
    try:
        config = SimConfig(
            dt=args.dt,
            horizon=args.horizon,
            paths=args.paths,
            seed=args.seed,
            antithetic=not args.no_antithetic,
            workers=args.workers,
            extrapolate=not args.no_extrapolate,
        )
    except SimConfigError as exc:
        raise ConfigError(str(exc)) from None
    sol = solve_policy(problem)
    spec = SuiteSpec(
        sol,
        levels=tuple(_parse_floats(args.levels)),
        surplus=tuple(_parse_floats(args.surplus)),
        perturbations=DEFAULT_PERTURBATIONS,
        probe_x0=args.probe_x0,
        x_star_shift=args.x_star_shift,
    )
    report = validation_suite([spec], config)
    if args.out:
        rows = [
            [c.label, c.kind, csv_num(c.estimate), csv_num(c.std_error), csv_num(c.target), csv_num(c.budget), "pass" if c.passed else "fail"]
            for c in report.checks
        ]
        _emit(_csv_text(problem, ["check", "kind", "estimate", "se", "target", "budget", "result"], rows), args.out)
    _say(
        args,
        f"b*={g6(sol.b_star)} x*={g6(sol.x_star)}  simulated trigger x*{args.x_star_shift:+g}",
        f"paths={config.paths} dt={config.dt:g} horizon={g6(config.horizon_for(problem.params.rho))} seed={config.seed}",
        *report.lines(),
        f"{len(report.failures())} of {len(report.checks)} checks failed ({report.seconds:.1f} s)",
    )
    return EXIT_OK if report.passed else EXIT_MC


# --- entry point ----------------------------------------------------------------


def _globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = parser.add_argument_group("global options")
    g.add_argument("--config", default=d(None), help="problem JSON file")
    g.add_argument("--benchmark", default=d("proportional"), choices=BENCHMARKS, help="built-in problem when no --config")
    g.add_argument("--out", default=d(None), help="write JSON/CSV output here instead of stdout")
    g.add_argument("--seed", type=int, default=d(0), help="Monte Carlo seed")
    g.add_argument("--quiet", action="store_true", default=d(False), help="suppress the human-readable table")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reinsurance-timing", description=__doc__.split("\n\n")[0])
    _globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="optimal level, trigger and verification report")
    _globals(p, suppress=True)
    p.add_argument("--json", action="store_true", help="print the solution JSON to stdout")

    p = sub.add_parser("sweep", help="b*, x* (and optionally U) along a parameter grid, as CSV")
    _globals(p, suppress=True)
    p.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    p.add_argument("--grid", help="lo,hi,n linear spacing")
    p.add_argument("--values", help="explicit comma-separated grid")
    p.add_argument("--points", type=int, default=21, help="points of the default +-50%% grid")
    p.add_argument("--value-at", help="comma-separated surplus values for U_at_<x> columns")

    p = sub.add_parser("compare", help="U under proportional vs excess-of-loss retention, as CSV")
    _globals(p, suppress=True)
    p.add_argument("--proportional", help="config for the proportional slot (default: base problem)")
    p.add_argument("--excess-of-loss", help="config for the excess-of-loss slot (default: base problem)")
    p.add_argument("--x-grid", type=_x_grid, default=[0.0, 40.0, 200], help="lo,hi,n (default 0,40,200)")

    p = sub.add_parser("simulate", help="Monte Carlo validation of G, U and the optimality of (b*, x*)")
    _globals(p, suppress=True)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-antithetic", action="store_true")
    p.add_argument("--no-extrapolate", action="store_true", help="report the plain projected-Euler estimate")
    p.add_argument("--levels", default="0.25,0.5,1")
    p.add_argument("--surplus", default="0,5,20")
    p.add_argument("--probe-x0", type=float, default=0.0)
    p.add_argument("--x-star-shift", type=float, default=0.0, help="simulate the policy at x* + shift")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = _parse_overrides(extra)
        if args.command == "compare":
            base = build_problem(args, {} if (args.proportional or args.excess_of_loss) else overrides)
            return cmd_compare(args, base, overrides)
        problem = build_problem(args, overrides)
        if args.command == "solve":
            return cmd_solve(args, problem)
        if args.command == "sweep":
            return cmd_sweep(args, problem)
        return cmd_simulate(args, problem)
    except (ConfigError, ModelError, SimConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
