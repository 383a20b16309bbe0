"""Experiment drivers behind the command line: single runs, convergence
ladders, flux-parameter sweeps and the Barenblatt front study.

Every driver takes a validated :class:`RunConfig` and returns plain results;
writing files is left to :mod:`esdg.cli`.  Ladder and sweep members are
independent solves and run in a process pool when ``jobs > 1``.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .config import FluxConfig, LimiterSection, RunConfig
from .diagnostics import RunReport, convergence_orders, l1_error
from .mesh_basis import Basis, build_mesh
from .models import barenblatt
from .projector import DGField, project_l2
from .reference import integrate_explicit, integrate_implicit
from .time_integration import run


def cells_for(cfg: RunConfig, h: float) -> int:
    a, b = cfg.domain
    n = int(round((b - a) / h))
    if not math.isclose(n * h, b - a, rel_tol=1e-9):
        raise ValueError(f"h={h} does not divide the domain [{a}, {b}]")
    return n


def initial_field(cfg: RunConfig, n_cells: Optional[int] = None, degree: Optional[int] = None) -> DGField:
    a, b = cfg.domain
    mesh = build_mesh(a, b, cfg.n_cells if n_cells is None else n_cells)
    return project_l2(cfg.initial.build(), mesh, Basis(cfg.degree if degree is None else degree))


def solve(
    cfg: RunConfig,
    *,
    n_cells: Optional[int] = None,
    degree: Optional[int] = None,
    flux: Optional[FluxConfig] = None,
    c_of_k: Optional[float] = None,
    limiter: Optional[LimiterSection] = None,
    t_end: Optional[float] = None,
    stop_on_negative: Optional[bool] = None,
    record_every: Optional[int] = None,
    snapshot_times=None,
) -> RunReport:
    """One solve of ``cfg`` with optional per-call replacements."""
    initial = initial_field(cfg, n_cells, degree)
    lim = cfg.limiter if limiter is None else limiter
    limiter_cfg = lim.build()
    threshold = None
    if cfg.stop.max_avg_factor is not None:
        start = initial.coeffs
        if lim.limit_initial and limiter_cfg.enabled:
            from .limiter import limit_coefficients

            start, _, _ = limit_coefficients(start, limiter_cfg)
        threshold = cfg.stop.max_avg_factor * float(start[:, 0].max())
    return run(
        initial,
        cfg.build_model(),
        (cfg.flux if flux is None else flux).build(),
        cfg.time.build(t_end=t_end, c_of_k=c_of_k),
        limiter_cfg,
        scheme=cfg.time.scheme,
        record_every=cfg.outputs.record_every if record_every is None else record_every,
        snapshot_times=cfg.outputs.snapshot_times if snapshot_times is None else snapshot_times,
        stop_on_negative_average=cfg.stop.on_negative_average if stop_on_negative is None else stop_on_negative,
        stop_when_max_avg_exceeds=threshold,
        limit_initial=lim.limit_initial,
    )


# convergence ladders


@dataclass
class LadderResult:
    degree: int
    flux: FluxConfig
    h: list
    errors: list
    orders: list
    steps: list = field(default_factory=list)
    entropy_increases: list = field(default_factory=list)
    mass_drift: list = field(default_factory=list)
    h_ref: float = 0.0

    def rows(self):
        """(h, l1_error, order) with no order on the first row."""
        out = []
        for i, (h, e) in enumerate(zip(self.h, self.errors)):
            out.append((h, e, None if i == 0 else self.orders[i - 1]))
        return out


def convergence_time(cfg: RunConfig) -> float:
    t = cfg.convergence.t_end
    return cfg.time.t_end if t is None else t


def reference_field(cfg: RunConfig, h_ref: float) -> DGField:
    ref = cfg.convergence.reference
    initial = initial_field(cfg, cells_for(cfg, h_ref), ref.degree)
    model, params = cfg.build_model(), ref.flux.build()
    t_end = convergence_time(cfg)
    if ref.integrator == "implicit":
        return integrate_implicit(initial, model, params, t_end)
    lim = ref.limiter.build() if ref.limiter is not None else None
    return integrate_explicit(initial, model, params, t_end, ref.c_of_k, limiter=lim)


def _ladder_member(cfg_dict, ladder_index, h):
    cfg = RunConfig.from_dict(cfg_dict)
    ladder = cfg.convergence.ladders[ladder_index]
    report = solve(
        cfg,
        n_cells=cells_for(cfg, h),
        degree=ladder.degree,
        flux=ladder.flux,
        c_of_k=ladder.c_of_k,
        limiter=ladder.limiter,
        t_end=convergence_time(cfg),
        snapshot_times=(),
    )
    return report.final_u.coeffs, report.steps, len(report.entropy_increases()), report.relative_mass_drift()


def _reference_member(cfg_dict, h_ref):
    return reference_field(RunConfig.from_dict(cfg_dict), h_ref).coeffs


def _map(fn, args, jobs):
    if jobs <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *a) for a in args]
        return [f.result() for f in futures]


def converge(cfg: RunConfig, jobs: int = 1) -> list[LadderResult]:
    """Run every ladder of ``cfg.convergence`` against a refined reference.

    The reference for a ladder is a degree-``reference.degree`` solve on
    h_finest / ``reference.refine``, evaluated pointwise at the coarse
    quadrature nodes.  References are shared between ladders with the same
    finest mesh.
    """
    ladders = cfg.convergence.ladders
    if not ladders:
        raise ValueError("config has no convergence ladders")
    cfg_dict = cfg.to_dict()
    refine = cfg.convergence.reference.refine
    h_refs = sorted({ladder.h[-1] / refine for ladder in ladders}, reverse=True)
    ref_coeffs = _map(_reference_member, [(cfg_dict, h) for h in h_refs], jobs)
    a, b = cfg.domain
    refs = {
        h: DGField(build_mesh(a, b, cells_for(cfg, h)), cfg.convergence.reference.degree, c)
        for h, c in zip(h_refs, ref_coeffs)
    }
    tasks = [(cfg_dict, i, h) for i, ladder in enumerate(ladders) for h in ladder.h]
    outcomes = iter(_map(_ladder_member, tasks, jobs))
    results = []
    for ladder in ladders:
        ref = refs[ladder.h[-1] / refine]
        res = LadderResult(ladder.degree, ladder.flux, list(ladder.h), [], [], h_ref=ladder.h[-1] / refine)
        for h in ladder.h:
            coeffs, steps, n_incr, drift = next(outcomes)
            u = DGField(build_mesh(a, b, cells_for(cfg, h)), ladder.degree, coeffs)
            res.errors.append(l1_error(u, ref))
            res.steps.append(steps)
            res.entropy_increases.append(n_incr)
            res.mass_drift.append(drift)
        res.orders = convergence_orders(res.errors, res.h).tolist()
        results.append(res)
    return results


# flux-parameter sweep


@dataclass
class SweepRow:
    beta0: float
    beta1: float
    first_below_time: Optional[float]
    t_end: float
    status: str
    min_average: float

    @property
    def label(self) -> str:
        if self.first_below_time is None:
            return f">{self.t_end:.7g}"
        return f"{self.first_below_time:.7g}"


def _sweep_member(cfg_dict, beta0, beta1):
    cfg = RunConfig.from_dict(cfg_dict)
    flux = replace(cfg.flux, beta0=float(beta0), beta1=float(beta1))
    # track, don't abort: failed cells are flattened and the run stops at
    # the first average below the floor
    lim = replace(cfg.limiter, enabled=True, fallback="flatten")
    report = solve(cfg, flux=flux, limiter=lim, stop_on_negative=True, snapshot_times=())
    return SweepRow(
        float(beta0),
        float(beta1),
        report.first_below_delta_time,
        cfg.time.t_end,
        report.status,
        float(min(report.min_avg_series)),
    )


def sweep_beta(cfg: RunConfig, jobs: int = 1) -> list[SweepRow]:
    """First time any cell average drops below the floor, per (beta0, beta1)."""
    pairs = cfg.sweep.beta_pairs or ((cfg.flux.beta0, cfg.flux.beta1),)
    cfg_dict = cfg.to_dict()
    return _map(_sweep_member, [(cfg_dict, b0, b1) for b0, b1 in pairs], jobs)


# Barenblatt front study


@dataclass
class BarenblattResult:
    exact_time: float
    solver_time: float
    limited: RunReport
    unlimited: Optional[RunReport]
    unlimited_error: Optional[str]
    l1_limited: float
    l1_unlimited: Optional[float]
    h_errors: list = field(default_factory=list)
    degree_errors: list = field(default_factory=list)

    @property
    def limited_min(self) -> float:
        return float(min(self.limited.min_value_series))

    @property
    def unlimited_min(self) -> Optional[float]:
        if self.unlimited is None:
            return None
        return float(min(self.unlimited.min_value_series))


def exact_barenblatt(cfg: RunConfig):
    bc = cfg.barenblatt

    def exact(x):
        return barenblatt(bc.m, x, bc.exact_time)

    return exact


def barenblatt_study(cfg: RunConfig) -> BarenblattResult:
    """Limited vs unlimited solve, plus optional mesh and degree comparisons."""
    from .time_integration import SolverFailure

    bc = cfg.barenblatt
    exact = exact_barenblatt(cfg)
    t = bc.solver_time
    limited = solve(cfg, t_end=t, snapshot_times=(t,))
    off = replace(cfg.limiter, enabled=False, limit_initial=False)
    unlimited, unlimited_error = None, None
    try:
        unlimited = solve(cfg, t_end=t, limiter=off, snapshot_times=(t,))
    except SolverFailure as exc:
        unlimited, unlimited_error = exc.report, str(exc)
    result = BarenblattResult(
        exact_time=bc.exact_time,
        solver_time=t,
        limited=limited,
        unlimited=unlimited,
        unlimited_error=unlimited_error,
        l1_limited=l1_error(limited.final_u, exact),
        l1_unlimited=None if unlimited_error else l1_error(unlimited.final_u, exact),
    )
    for h in bc.h_values:
        rep = solve(cfg, n_cells=cells_for(cfg, h), t_end=t, snapshot_times=())
        result.h_errors.append((cfg.degree, h, l1_error(rep.final_u, exact)))
    for entry in bc.compare_degrees:
        rep = solve(cfg, degree=entry.degree, flux=entry.flux, c_of_k=entry.c_of_k, t_end=t, snapshot_times=())
        result.degree_errors.append((entry.degree, cfg.n_cells, l1_error(rep.final_u, exact)))
    return result


def sample_points(u: DGField, per_cell: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell-interior sample points (x, u_h(x)) for plot-ready snapshots."""
    xi = -1.0 + (2.0 * np.arange(per_cell) + 1.0) / per_cell
    x = u.mesh.map_to_physical(xi).ravel()
    return x, u.values_at(xi).ravel()
