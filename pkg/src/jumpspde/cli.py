"""Batch front end: ``jumpspde <command> [--scenario FILE] [--set section.key=value ...]``.

Each run writes ``scenario.effective``, ``summary.txt`` and CSV files into a
fresh timestamped directory under ``--out``. Exit status: 0 all checks pass,
1 a check failed, 2 invalid scenario, 3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import verify as V
from .scalar_monotone import ResolventError, linear
from .scenario import Scenario, ScenarioError, load_scenario
from .solver import SolverError, picard_solve, realize_noise, strong_residual, time_grid

log = logging.getLogger("jumpspde")

COMMANDS = ("simulate", "converge", "bj", "apriori", "continuity", "oracle", "generalized")


def path_csv(grid: np.ndarray, coeffs: np.ndarray, name: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t [-]"] + [f"{name}_{k + 1} [coeff]" for k in range(coeffs.shape[-1])])
    for t, row in zip(grid, coeffs):
        w.writerow([repr(float(t))] + [repr(float(x)) for x in row])
    return buf.getvalue()


def _noise(sc: Scenario, problem, **kw):
    return realize_noise(problem, time_grid(problem.T, sc.dt), sc.samples, sc.seed, **kw)


def run_simulate(sc: Scenario) -> tuple[list, dict]:
    problem = sc.problem()
    lam_txt = sc.get("simulate", "lambda").strip()
    lam = float(lam_txt) if lam_txt else sc.lambdas[-1]
    s = sc.getint("simulate", "sample")
    noise = realize_noise(problem, time_grid(problem.T, sc.dt), s + 1, sc.seed)
    sol = picard_solve(problem, lam, noise, **sc.picard_kw())
    res = strong_residual(sol, problem, noise, eps=1e-2)
    report = V.ExperimentReport(f"simulate sample={s}", float(V.sup_norm(sol.u[s], problem.basis, 2)), 0.0, 1,
                                lam=lam, notes=f"grid-sup L2 norm; {sol.picard_iterations} Picard iterations; "
                                               f"strong-form residual (eps=1e-2) {res:.3e}")
    tag = f"lambda={lam!r}"
    files = {f"simulate_{tag}_{name}.csv": path_csv(sol.grid, getattr(sol, name)[s], name)
             for name in ("u", "v", "ga")}
    return [report], files


def run_converge(sc: Scenario):
    problem = sc.problem()
    return V.check_cauchy_rate(problem, sc.lambdas, _noise(sc, problem), sc.thresholds,
                               require_regime=sc.config.getboolean("solver", "require_regime"),
                               **sc.picard_kw()), {}


def run_apriori(sc: Scenario):
    problem = sc.problem()
    return V.check_apriori(problem, sc.lambdas, _noise(sc, problem), sc.thresholds, **sc.picard_kw()), {}


def run_bj(sc: Scenario):
    problem = sc.problem()
    res = V.check_bj(problem.jumps, sc.floats("bj", "thetas"), sc.floats("bj", "amplitudes"), problem.basis,
                     problem.T, sc.dt, sc.floats("bj", "q_values"), sc.samples, sc.seed, sc.thresholds)
    return list(res.reports) + list(res.summaries), {}


def run_continuity(sc: Scenario):
    problem = sc.problem()
    other = sc.perturbed_problem(problem)
    return V.check_data_continuity(problem, other, sc.floats("continuity", "scales"), _noise(sc, problem),
                                   sc.getfloat("continuity", "lambda"), sc.thresholds, **sc.picard_kw()), {}


def run_oracle(sc: Scenario):
    problem = sc.problem(drift=linear(sc.getfloat("oracle", "c")))
    return V.check_linear_oracle(problem, sc.getfloat("oracle", "lambda"), sc.dt, sc.samples, sc.seed,
                                 sc.thresholds, refine=sc.getint("oracle", "refine"), **sc.picard_kw()), {}


def run_generalized(sc: Scenario):
    problem = sc.problem()
    cut = [int(c) for c in sc.floats("generalized", "cutoffs")] or None
    return V.check_generalized(problem, sc.floats("generalized", "levels"), _noise(sc, problem),
                               sc.getfloat("generalized", "lambda"), cut, sc.thresholds, **sc.picard_kw()), {}


RUNNERS = {"simulate": run_simulate, "converge": run_converge, "bj": run_bj, "apriori": run_apriori,
           "continuity": run_continuity, "oracle": run_oracle, "generalized": run_generalized}


def make_run_dir(out: Path, command: str) -> Path:
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
    base = out / f"{command}-{stamp}"
    path, n = base, 0
    while path.exists():
        n += 1
        path = Path(f"{base}-{n}")
    path.mkdir(parents=True)
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jumpspde", description="Monte Carlo lab for monotone SPDEs with jumps")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--scenario", help="scenario file (INI); built-in defaults when omitted")
    parser.add_argument("--seed", type=lambda v: int(v, 0), help="master seed (overrides experiment.seed)")
    parser.add_argument("--samples", type=int, help="Monte Carlo sample count (overrides experiment.samples)")
    parser.add_argument("--out", default="runs", help="parent directory for run output (default: runs)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one scenario key; repeatable")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"experiment.seed={args.seed}")
    if args.samples is not None:
        overrides.append(f"experiment.samples={args.samples}")
    try:
        sc = load_scenario(args.scenario, overrides)
    except ScenarioError as e:
        print(e, file=sys.stderr)
        return 2
    except (OSError, ValueError) as e:  # unreadable or unparsable file
        print(f"invalid scenario: {e}", file=sys.stderr)
        return 2
    try:
        reports, files = RUNNERS[args.command](sc)
    except (SolverError, ResolventError) as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return 3

    run_dir = make_run_dir(Path(args.out), args.command)
    (run_dir / "scenario.effective").write_text(sc.effective())
    (run_dir / f"{args.command}.csv").write_text(V.reports_to_csv(reports))
    for name, body in files.items():
        (run_dir / name).write_text(body)
    header = (f"# {args.command}  seed={sc.seed}  samples={sc.samples}\n"
              f"# regime: {sc.regime().describe()}\n")
    summary = header + V.summary_text(reports)
    (run_dir / "summary.txt").write_text(summary)
    print(summary, end="")
    print(f"output: {run_dir}")
    verdicts = [r.passed for r in reports if r.passed is not None]
    return 0 if all(verdicts) else 1


if __name__ == "__main__":
    sys.exit(main())
