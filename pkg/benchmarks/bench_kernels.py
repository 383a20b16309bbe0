"""Compiled core vs NumPy fallback: operator evaluation, limiter and full runs.

    python benchmarks/bench_kernels.py [--cells 80] [--repeat 5] [--json out.json]

Each timing is the best of ``--repeat`` runs.  The two backends are also
checked against each other, so a speedup is only reported for matching
results.
"""
from __future__ import annotations

import argparse
import json
import logging
import time

import numpy as np

from esdg import _kernels
from esdg.dg_operator import DGOperator, FluxParams
from esdg.limiter import LimiterConfig, limit_coefficients
from esdg.mesh_basis import Basis, build_mesh
from esdg.models import make_model
from esdg.projector import project_l2
from esdg.time_integration import TimeController, run

CASES = {
    "porous_medium_convection": (
        {"m": 2.0},
        lambda x: 0.5 + 0.5 * np.sin(np.pi * x),
        (-1.0, 1.0),
    ),
    "double_well": (
        {"nu": 1.0, "m": 2.0},
        lambda x: 0.1 / np.sqrt(0.4 * np.pi) * np.exp(-(x**2) / 0.4),
        (-2.0, 2.0),
    ),
    "general_fp": (
        {"N": 3.0},
        lambda x: (np.exp(-((x - 2) ** 2) / 2) + np.exp(-((x + 2) ** 2) / 2)) / (2 * np.sqrt(2 * np.pi)),
        (-6.0, 6.0),
    ),
}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_case(name, n_cells, degree, repeat):
    params, u0, (a, b) = CASES[name]
    model = make_model(name, params)
    flux = FluxParams(4.0, 1.0 / 12.0)
    u = project_l2(u0, build_mesh(a, b, n_cells), Basis(degree))
    ops = {be: DGOperator(u.mesh, degree, model, flux, backend=be) for be in ("python", "cython")}
    rows = []

    def compare(kind, results, timings, inner):
        diff = float(np.max(np.abs(results["python"] - results["cython"])))
        t_py, t_c = timings["python"] / inner, timings["cython"] / inner
        rows.append({
            "case": name, "kernel": kind, "cells": n_cells, "k": degree,
            "python_s": t_py, "cython_s": t_c, "speedup": t_py / t_c, "max_abs_diff": diff,
        })

    inner = 200
    res, tim = {}, {}
    for be, op in ops.items():
        res[be] = op.evaluate(u.coeffs)
        tim[be] = best_of(lambda: [op.evaluate(u.coeffs) for _ in range(inner)], repeat)
    compare("rhs", res, tim, inner)

    rng = np.random.default_rng(0)
    noisy = u.coeffs + 0.05 * rng.standard_normal(u.coeffs.shape) * np.abs(u.coeffs[:, :1])
    lim = LimiterConfig(delta=1e-10, fallback="flatten")
    res, tim = {}, {}
    for be in ops:
        res[be] = limit_coefficients(noisy, lim, backend=be)[0]
        tim[be] = best_of(lambda: [limit_coefficients(noisy, lim, backend=be) for _ in range(inner)], repeat)
    compare("limiter", res, tim, inner)

    n_steps = 200
    dt = 1e-3 * u.mesh.h**2
    res, tim = {}, {}
    for be in ops:
        def full():
            return run(u, model, flux, TimeController(t_end=n_steps * dt, policy="explicit_dt", dt=dt),
                       lim, backend=be, record_every=n_steps)
        res[be] = full().final_u.coeffs
        tim[be] = best_of(full, repeat)
    compare(f"run_{n_steps}_steps", res, tim, 1)
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--cells", type=int, default=80)
    parser.add_argument("--degrees", type=int, nargs="+", default=[1, 2, 3])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", help="write results to this file")
    args = parser.parse_args(argv)
    logging.disable(logging.WARNING)
    if not _kernels.HAVE_COMPILED:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    rows = []
    for name in CASES:
        for k in args.degrees:
            rows.extend(bench_case(name, args.cells, k, args.repeat))
    print(f"{'case':<26}{'kernel':<16}{'k':>2}{'numpy [s]':>13}{'cython [s]':>13}{'speedup':>9}{'max diff':>11}")
    for r in rows:
        print(
            f"{r['case']:<26}{r['kernel']:<16}{r['k']:>2}{r['python_s']:>13.3e}{r['cython_s']:>13.3e}"
            f"{r['speedup']:>9.1f}{r['max_abs_diff']:>11.1e}"
        )
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
