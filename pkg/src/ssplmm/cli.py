"""Command-line front end.

Subcommands: ``run`` (one integration, writes step and summary CSVs),
``convergence`` (L1 error table over several grids), ``certificate``
(optimal SSP coefficient for given step ratios) and ``batch`` (several
config files in parallel).

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from .config import METHODS, RunConfig, build_config, load_config
from .diagnostics import ConvergenceTable, efficiency_ratio, fmt, l1_error, step_statistics
from .errors import (
    ConfigError,
    DomainError,
    EmptyTrajectory,
    InfeasibleOrder,
    NonFiniteState,
    NonPhysicalState,
    NonPositiveStep,
    StartupFailure,
)
from .formulas import (
    build_ratio_history,
    make_second_order,
    ratio_history_from_Omegas,
    third_order_certificate,
    upper_bound,
)
from .integrator import integrate
from .spatial import make_problem

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

STEP_COLUMNS = ["n", "t", "h", "nu", "tv", "method_tag", "rejections"]
SUMMARY_COLUMNS = ["s", "N", "h_min", "h_avg", "final_tv", "l1_error"]


class UsageError(ConfigError):
    pass


def problem_for(config: RunConfig):
    return make_problem(config.problem, config.n_cells, config.spatial_scheme, config.cfl_fe)


def execute(config: RunConfig):
    """Run one configuration; return ``(trajectory, problem, summary dict)``."""
    problem = problem_for(config)
    traj = integrate(problem, config)
    summary = {k: None for k in SUMMARY_COLUMNS}
    try:
        N, h_min, h_avg = step_statistics(traj)
        summary.update(s=efficiency_ratio(traj), N=N, h_min=h_min, h_avg=h_avg)
    except EmptyTrajectory:
        summary["N"] = 0
    summary["final_tv"] = problem.total_variation(traj.final_state)
    exact = problem.exact_solution(traj.records[-1].t)
    if exact is not None:
        summary["l1_error"] = l1_error(traj.final_state, exact, problem.dx)
    return traj, problem, summary


def write_outputs(config: RunConfig, traj, problem, summary, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "steps.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STEP_COLUMNS)
        for r in traj.records:
            w.writerow([r.n, fmt(r.t), fmt(r.h), fmt(r.nu), fmt(r.tv), r.method_tag, r.rejected])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        w.writerow([fmt(summary[c]) for c in SUMMARY_COLUMNS])
    meta = {
        "problem": config.problem, "method": config.method, "cells": config.n_cells,
        "tfinal": config.t_final, "h1": config.h1, "gamma": config.gamma,
        "cfl-fe": config.cfl_fe, "conditions": "on" if config.enforce_conditions else "off",
        "reconstruction": config.spatial_scheme, **problem.metadata,
    }
    with open(out / "run.txt", "w") as fh:
        fh.writelines(f"{k} = {v}\n" for k, v in meta.items())
    if config.snapshot:
        u = np.atleast_2d(traj.final_state)
        with open(out / "solution.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + [f"q{i}" for i in range(u.shape[0])])
            for i, x in enumerate(problem.grid.centers):
                w.writerow([fmt(x)] + [fmt(v) for v in u[:, i]])


def _summary_line(config, summary):
    parts = [f"{config.problem} {config.method} cells={config.n_cells} T={config.t_final:g}"]
    for key in SUMMARY_COLUMNS:
        v = summary[key]
        if v is not None:
            parts.append(f"{key}={v:.6g}" if isinstance(v, float) else f"{key}={v}")
    return " ".join(parts)


def _run_one(config: RunConfig, out: Path) -> str:
    traj, problem, summary = execute(config)
    write_outputs(config, traj, problem, summary, out)
    return _summary_line(config, summary)


def _config_from_args(args) -> RunConfig:
    file_values = load_config(args.config) if getattr(args, "config", None) else {}
    return build_config(
        file_values,
        problem=args.problem,
        method=args.method,
        n_cells=getattr(args, "cells", None),
        t_final=args.tfinal,
        h1=args.h1,
        gamma=args.gamma,
        cfl_fe=args.cfl_fe,
        enforce_conditions=False if args.no_conditions else None,
        out=args.out,
        reconstruction=args.reconstruction,
        snapshot=True if getattr(args, "snapshot", False) else None,
    )


def cmd_run(args) -> int:
    config = _config_from_args(args)
    print(_run_one(config, Path(config.out or "out")))
    return EXIT_OK


def _parse_int_list(text):
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"expected a list of integers, got {text!r}") from None


def cmd_convergence(args) -> int:
    resolutions = _parse_int_list(args.resolutions)
    if len(resolutions) < 2:
        raise UsageError("convergence needs at least two resolutions")
    base = _config_from_args(args)
    table = ConvergenceTable(base.method)
    for n in resolutions:
        config = base.with_(n_cells=n)
        _, _, summary = execute(config)
        if summary["l1_error"] is None:
            raise UsageError(f"problem {config.problem!r} has no exact solution")
        table.add(n, summary["l1_error"])
    out = Path(base.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"convergence_{base.method}.csv"
    table.write_csv(path)
    print(table.format())
    print(f"wrote {path}")
    return EXIT_OK


def _parse_numbers(text):
    try:
        return [Fraction(x) for x in text.replace(",", " ").split()]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"expected numbers or fractions, got {text!r}") from None


def _ratios_from_args(args):
    if args.ratios_file:
        values = {}
        for line in Path(args.ratios_file).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if "=" in line:
                key, val = (s.strip() for s in line.split("=", 1))
                values[key.lower()] = val
        args.steps = args.steps or values.get("steps")
        args.omega = args.omega or values.get("omega")
        if args.k is None and "k" in values:
            args.k = int(values["k"])
    if args.steps and args.omega:
        raise UsageError("give either --steps or --Omega, not both")
    if args.omega:
        ratios = ratio_history_from_Omegas([float(x) for x in _parse_numbers(args.omega)])
    elif args.steps:
        ratios = build_ratio_history([float(x) for x in _parse_numbers(args.steps)])
    else:
        if args.k is None:
            raise UsageError("need --k, --steps or --Omega")
        ratios = build_ratio_history([1.0] * args.k)
    k = args.k if args.k is not None else ratios.k
    if k != ratios.k:
        raise UsageError(f"--k {k} does not match {ratios.k} ratios")
    if k < 2:
        raise UsageError("k must be at least 2")
    return k, ratios


def cmd_certificate(args) -> int:
    k, ratios = _ratios_from_args(args)
    p = args.p
    print(f"k = {k}, p = {p}")
    print("Omega = (" + ", ".join(f"{x:.10g}" for x in ratios.Omegas) + ")")
    bound = upper_bound(ratios.Omega_k, p)
    if p == 3:
        cert = third_order_certificate(k, ratios)
        print(f"{'j':>3}  {'r_j':>22}")
        for j, r in enumerate(cert.r_values):
            mark = "  *" if j in cert.argmin_indices else ""
            print(f"{j:>3}  {r:22.17g}{mark}")
        print("argmin = " + ", ".join(str(i) for i in cert.argmin_indices))
        support = sorted(cert.support)
        C = cert.optimal_C
        if not cert.unique:
            print("note: optimal formula is not unique (one-parameter family)")
    else:
        formula = make_second_order(k, ratios)
        C = formula.ssp_coeff
        tol = 1e-12
        support = sorted(
            [f"delta_{j}" for j, d in enumerate(formula.deltas) if d > tol]
            + [f"beta_{j}" for j, b in enumerate(formula.betas) if b > tol]
        )
    print("support = {" + ", ".join(support) + "}")
    print(f"C = {C:.17g}")
    print(f"upper bound = {bound:.17g}")
    return EXIT_OK


def _batch_worker(item):
    path, out = item
    config = build_config(load_config(path))
    target = Path(config.out) if config.out else out
    return _run_one(config, target)


def cmd_batch(args) -> int:
    paths = [Path(p) for p in args.configs]
    root = Path(args.out or "out")
    items = [(p, root / p.stem) for p in paths]
    for p in paths:  # fail fast on bad files before spawning workers
        build_config(load_config(p))
    threads = int(os.environ.get("SSP_LMM_THREADS", os.cpu_count() or 1))
    workers = max(1, min(threads, len(items)))
    if workers == 1:
        lines = [_batch_worker(it) for it in items]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            lines = list(pool.map(_batch_worker, items))
    for line in lines:
        print(line)
    return EXIT_OK


def _add_run_flags(p, with_cells=True):
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--problem", choices=["advection", "burgers", "blastwave"])
    p.add_argument("--method", help=f"one of {', '.join(METHODS)}")
    if with_cells:
        p.add_argument("--cells", type=int)
    p.add_argument("--tfinal", type=float)
    p.add_argument("--h1", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--cfl-fe", dest="cfl_fe", type=float)
    p.add_argument("--no-conditions", action="store_true",
                   help="skip the a-posteriori h_FE checks of the third-order methods")
    p.add_argument("--reconstruction", choices=["mc", "weno5"])
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssplmm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one problem")
    _add_run_flags(p)
    p.add_argument("--snapshot", action="store_true", help="also write solution.csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("convergence", help="L1 errors over several grids")
    _add_run_flags(p, with_cells=False)
    p.add_argument("--resolutions", required=True, help="e.g. 128,256,512")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("certificate", help="optimal SSP coefficient for given step ratios")
    p.add_argument("--k", type=int)
    p.add_argument("--p", type=int, choices=[2, 3], default=3)
    p.add_argument("--steps", help="h_{n-k+1},...,h_n (fractions allowed)")
    p.add_argument("--Omega", dest="omega", help="0,Omega_1,...,Omega_k (fractions allowed)")
    p.add_argument("--ratios-file", help="file with k=, steps= or Omega= lines")
    p.set_defaults(func=cmd_certificate)

    p = sub.add_parser("batch", help="run several config files in parallel")
    p.add_argument("configs", nargs="+")
    p.add_argument("--out", help="root directory; each config writes to <out>/<name>")
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleOrder as exc:
        print(f"error: {exc} (Omega_k must exceed {exc.threshold:g})", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, DomainError, NonPositiveStep, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteState, NonPhysicalState, StartupFailure, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
