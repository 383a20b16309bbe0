"""Command line front end.

    esdg run         --config cfg.json | --preset example5   [--out DIR]
    esdg converge    --preset example3 [--jobs 4]
    esdg sweep-beta  --preset table1
    esdg barenblatt  --preset example1

``--override key.sub=value`` edits any config field by dotted path.  Exit
codes: 0 success, 2 configuration error, 3 solver failure.  Numbers are
written with 7 significant digits.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import Optional

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .diagnostics import RunReport
from .experiments import (
    barenblatt_study,
    converge,
    exact_barenblatt,
    sample_points,
    solve,
    sweep_beta,
)
from .presets import PRESETS
from .time_integration import SolverFailure

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

log = logging.getLogger("esdg")


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.7g}"


def write_csv(path: str, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_json(path: str, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _round(value):
    if isinstance(value, float):
        return float(f"{value:.7g}")
    if isinstance(value, dict):
        return {k: _round(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round(v) for v in value]
    return value


def write_series(path: str, report: RunReport):
    cols = zip(
        report.times,
        report.entropy_series,
        report.mass_series,
        report.min_avg_series,
        report.min_value_series,
    )
    write_csv(path, ("t", "entropy", "mass", "min_cell_avg", "min_cell_value"), cols)


def write_snapshot(path: str, u, per_cell: int, exact=None):
    x, uh = sample_points(u, per_cell)
    if exact is None:
        write_csv(path, ("x", "u_h"), zip(x, uh))
    else:
        write_csv(path, ("x", "u_h", "u_exact"), zip(x, uh, exact(x)))


def report_summary(report: RunReport) -> dict:
    return _round(
        {
            "status": report.status,
            "steps": report.steps,
            "final_time": report.final_time,
            "final_entropy": report.entropy_series[-1] if report.entropy_series else None,
            "relative_mass_drift": report.relative_mass_drift(),
            "entropy_increases": int(len(report.entropy_increases())),
            "min_cell_avg": min(report.min_avg_series) if report.min_avg_series else None,
            "min_cell_value": min(report.min_value_series) if report.min_value_series else None,
            "max_cell_avg": max(report.max_avg_series) if report.max_avg_series else None,
            "first_below_delta_time": report.first_below_delta_time,
            "first_negative_time": report.first_negative_time,
            "n_limited": report.n_limited,
            "events": [e.as_dict() for e in report.events],
        }
    )


def _persist_run(out: str, cfg: RunConfig, report: RunReport, exact=None, prefix: str = ""):
    write_series(os.path.join(out, f"{prefix}series.csv"), report)
    for t, u in sorted(report.snapshots.items()):
        write_snapshot(os.path.join(out, f"{prefix}snapshot_t{fmt(t)}.csv"), u, cfg.outputs.samples_per_cell, exact)
    write_json(os.path.join(out, f"{prefix}summary.json"), report_summary(report))


def _persist_failure(out: str, cfg: RunConfig, exc: SolverFailure, prefix: str = ""):
    report = exc.report
    write_series(os.path.join(out, f"{prefix}series.csv"), report)
    write_snapshot(os.path.join(out, f"{prefix}failure_snapshot.csv"), exc.state.u, cfg.outputs.samples_per_cell)
    summary = report_summary(report)
    summary["error"] = str(exc)
    summary["failure_time"] = _round(exc.state.t)
    write_json(os.path.join(out, f"{prefix}summary.json"), summary)


def cmd_run(cfg: RunConfig, out: str, jobs: int) -> int:
    try:
        report = solve(cfg)
    except SolverFailure as exc:
        _persist_failure(out, cfg, exc)
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    _persist_run(out, cfg, report)
    s = report_summary(report)
    print(
        f"{cfg.name}: {s['status']} at t={fmt(s['final_time'])}, steps={s['steps']}, "
        f"entropy={fmt(s['final_entropy'])}, mass drift={fmt(s['relative_mass_drift'])}, "
        f"entropy increases={s['entropy_increases']}"
    )
    return EXIT_OK


def cmd_converge(cfg: RunConfig, out: str, jobs: int) -> int:
    try:
        results = converge(cfg, jobs=jobs)
    except SolverFailure as exc:
        _persist_failure(out, cfg, exc, prefix="converge_")
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    summary = []
    for res in results:
        path = os.path.join(out, f"convergence_k{res.degree}.csv")
        write_csv(path, ("h", "l1_error", "order"), res.rows())
        print(f"k={res.degree} (beta0={fmt(res.flux.beta0)}, beta1={fmt(res.flux.beta1)}), h_ref={fmt(res.h_ref)}")
        for h, e, p in res.rows():
            print(f"  {fmt(h):>8}  {fmt(e):>14}  {fmt(p) or '--':>8}")
        summary.append(
            _round(
                {
                    "degree": res.degree,
                    "beta0": res.flux.beta0,
                    "beta1": res.flux.beta1,
                    "h": res.h,
                    "l1_error": res.errors,
                    "order": res.orders,
                    "h_ref": res.h_ref,
                    "steps": res.steps,
                    "entropy_increases": res.entropy_increases,
                    "relative_mass_drift": res.mass_drift,
                }
            )
        )
    write_json(os.path.join(out, "convergence_summary.json"), summary)
    return EXIT_OK


def cmd_sweep_beta(cfg: RunConfig, out: str, jobs: int) -> int:
    rows = sweep_beta(cfg, jobs=jobs)
    write_csv(
        os.path.join(out, "sweep_beta.csv"),
        ("beta0", "beta1", "first_below_delta", "status", "min_cell_avg"),
        [(r.beta0, r.beta1, r.label, r.status, r.min_average) for r in rows],
    )
    for r in rows:
        print(f"({fmt(r.beta0)}, {fmt(r.beta1)})  {r.label}")
    return EXIT_OK


def cmd_barenblatt(cfg: RunConfig, out: str, jobs: int) -> int:
    try:
        res = barenblatt_study(cfg)
    except SolverFailure as exc:
        _persist_failure(out, cfg, exc, prefix="barenblatt_")
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    exact = exact_barenblatt(cfg)
    _persist_run(out, cfg, res.limited, exact, prefix="limited_")
    if res.unlimited is not None and res.unlimited_error is None:
        _persist_run(out, cfg, res.unlimited, exact, prefix="unlimited_")
    rows = [("limited", cfg.degree, cfg.n_cells, res.l1_limited, res.limited_min)]
    if res.unlimited is not None:
        rows.append(("unlimited", cfg.degree, cfg.n_cells, res.l1_unlimited, res.unlimited_min))
    write_csv(os.path.join(out, "barenblatt_errors.csv"), ("run", "k", "n_cells", "l1_error", "min_u_h"), rows)
    if res.h_errors:
        write_csv(os.path.join(out, "barenblatt_mesh.csv"), ("k", "h", "l1_error"), res.h_errors)
    if res.degree_errors:
        write_csv(os.path.join(out, "barenblatt_degrees.csv"), ("k", "n_cells", "l1_error"), res.degree_errors)
    summary = _round(
        {
            "exact_time": res.exact_time,
            "solver_time": res.solver_time,
            "l1_limited": res.l1_limited,
            "l1_unlimited": res.l1_unlimited,
            "limited_min": res.limited_min,
            "unlimited_min": res.unlimited_min,
            "unlimited_undershoot": res.unlimited_min is not None and res.unlimited_min < 0.0,
            "unlimited_error": res.unlimited_error,
            "mesh_errors": [list(r) for r in res.h_errors],
            "degree_errors": [list(r) for r in res.degree_errors],
        }
    )
    write_json(os.path.join(out, "barenblatt_summary.json"), summary)
    print(
        f"B_{fmt(cfg.barenblatt.m)} at t={fmt(res.exact_time)}: l1 limited={fmt(res.l1_limited)} "
        f"(min {fmt(res.limited_min)}), unlimited={fmt(res.l1_unlimited)} (min {fmt(res.unlimited_min)})"
    )
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "converge": cmd_converge,
    "sweep-beta": cmd_sweep_beta,
    "barenblatt": cmd_barenblatt,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esdg", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
        p.add_argument("--out", default="esdg_out", help="output directory")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not args.config and not args.preset:
        print("error: give --config or --preset", file=sys.stderr)
        return EXIT_CONFIG
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    try:
        cfg = load_config(args.config, args.preset, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    np.random.seed(cfg.seed)
    os.makedirs(args.out, exist_ok=True)
    write_json(os.path.join(args.out, "config.json"), cfg.to_dict())
    return COMMANDS[args.command](cfg, args.out, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
