"""Explicit time stepping: forward Euler, Heun (SSP-RK2) and the solve loop.

One step of the solver is

1. a^(1)   = a^n + dt L(a^n)                      then limit, recompute q
2. a^{n+1} = a^n / 2 + (a^(1) + dt L(a^(1))) / 2  then limit, recompute q

so every stage is a forward-Euler step and bounds on cell averages carry
over from Euler to Heun.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .diagnostics import Event, RunReport
from .dg_operator import DGOperator, FluxParams, cfl_positivity
from .limiter import LimiterConfig, LimiterFailure, cell_minima, limit_coefficients
from .models import ModelSpec
from .projector import DGField, EvaluationDomainError

log = logging.getLogger(__name__)

POLICIES = ("fixed_ck", "positivity_cfl", "explicit_dt", "adaptive")


class SolverFailure(RuntimeError):
    """A solve aborted; ``report`` holds everything recorded up to the failure."""

    def __init__(self, message: str, report: RunReport, state: "SolveState"):
        super().__init__(message)
        self.report = report
        self.state = state


@dataclass(frozen=True)
class TimeController:
    """Step-size policy.

    fixed_ck        dt = c_of_k * h^2
    explicit_dt     dt given directly
    positivity_cfl  dt = safety * mu0 * h^2 with mu0 from the k = 2 positivity
                    bound, f_max refreshed from the interface traces every step
                    (or frozen at t = 0)
    adaptive        dt = min(c_of_k h^2 / max(f H''), cfl h / max|f'(u) q_x|, dt_max)
    """

    t_end: float
    policy: str = "fixed_ck"
    c_of_k: float = 0.1
    dt: Optional[float] = None
    safety: float = 1.0
    freeze_fmax: bool = False
    cfl: float = 0.1
    dt_max: float = math.inf

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.policy == "explicit_dt" and not (self.dt and self.dt > 0):
            raise ValueError("explicit_dt policy needs dt > 0")
        if self.policy in ("fixed_ck", "adaptive") and not self.c_of_k > 0:
            raise ValueError("c_of_k must be positive")

    def mu(self, h: float) -> Optional[float]:
        """Mesh ratio dt/h^2 for the static policies."""
        if self.policy == "fixed_ck":
            return self.c_of_k
        if self.policy == "explicit_dt":
            return self.dt / (h * h)
        return None


@dataclass
class SolveState:
    t: float
    step_index: int
    u: DGField
    q: DGField


@dataclass
class SolverContext:
    """Operator, limiter and bookkeeping shared by the step functions."""

    op: DGOperator
    limiter: LimiterConfig = field(default_factory=lambda: LimiterConfig(enabled=False))
    report: Optional[RunReport] = None
    n_limited: int = 0

    def _note(self, t: float, kind: str, cell: int = -1, detail: str = ""):
        if self.report is not None:
            self.report.events.append(Event(t, kind, cell, detail))

    def watch_averages(self, c: np.ndarray, t: float):
        if self.report is None:
            return
        amin = float(c[:, 0].min())
        rep = self.report
        if rep.first_below_delta_time is None and amin < self.limiter.delta:
            rep.first_below_delta_time = t
            self._note(t, "avg_below_delta", int(np.argmin(c[:, 0])), f"{amin:.7g}")
        if rep.first_negative_time is None and amin < 0.0:
            rep.first_negative_time = t
            self._note(t, "avg_negative", int(np.argmin(c[:, 0])), f"{amin:.7g}")

    def limit(self, c: np.ndarray, t: float) -> np.ndarray:
        self.watch_averages(c, t)
        if not self.limiter.enabled:
            return c
        out, n_lim, failed = limit_coefficients(c, self.limiter, self.op.backend)
        self.n_limited += n_lim
        for j in failed:
            lost = self.limiter.delta - c[j, 0]
            kind = "flatten_mass_change" if lost > 0 else "flatten"
            self._note(t, kind, int(j), f"avg={c[j, 0]:.7g}")
        return out

    def stage(self, a: np.ndarray, qa: np.ndarray, dt: float, t_new: float, last: bool):
        b = a + dt * self.op.rhs(a, qa)
        if self.limiter.per_stage or last:
            b = self.limit(b, t_new)
        return b


def _state(ctx: SolverContext, t: float, n: int, u: np.ndarray, q: np.ndarray) -> SolveState:
    mesh, k = ctx.op.mesh, ctx.op.degree
    return SolveState(t, n, DGField(mesh, k, u), DGField(mesh, k, q))


def step_euler(state: SolveState, dt: float, ctx: SolverContext) -> SolveState:
    """u^{n+1} = u^n + dt L(u^n, q^n), then limiter, then q^{n+1}."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return SolveState(state.t, state.step_index, state.u, state.q)
    t_new = state.t + dt
    u = ctx.stage(state.u.coeffs, state.q.coeffs, dt, t_new, True)
    return _state(ctx, t_new, state.step_index + 1, u, ctx.op.compute_q(u))


def step_heun(state: SolveState, dt: float, ctx: SolverContext) -> SolveState:
    """Heun's method as a convex combination of two Euler stages."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return SolveState(state.t, state.step_index, state.u, state.q)
    t_new = state.t + dt
    a = state.u.coeffs
    a1 = ctx.stage(a, state.q.coeffs, dt, t_new, False)
    q1 = ctx.op.compute_q(a1)
    b = 0.5 * a + 0.5 * (a1 + dt * ctx.op.rhs(a1, q1))
    b = ctx.limit(b, t_new)
    return _state(ctx, t_new, state.step_index + 1, b, ctx.op.compute_q(b))


def _finite_difference(fn, u, eps=1e-7):
    step = eps * np.maximum(1.0, np.abs(u))
    return (fn(u + step) - fn(u - step)) / (2.0 * step)


class _StepSizer:
    def __init__(self, controller: TimeController, op: DGOperator, k: int):
        self.c = controller
        self.op = op
        self.h = op.mesh.h
        self.k = k
        self._frozen = None

    def __call__(self, u: np.ndarray, q: np.ndarray) -> float:
        c, h = self.c, self.h
        if c.policy == "fixed_ck":
            return c.c_of_k * h * h
        if c.policy == "explicit_dt":
            return float(c.dt)
        if c.policy == "positivity_cfl":
            if c.freeze_fmax and self._frozen is not None:
                fmax = self._frozen
            else:
                fmax = self.op.max_trace_mobility(u)
                self._frozen = fmax
            mu0 = cfl_positivity(self.op.params, max(fmax, 1e-300), allow_outside=True)
            return min(c.safety * mu0 * h * h, c.dt_max)
        # adaptive
        model = self.op.model
        uq = u @ self.op.tabs.V.T
        if self.op.trivial:
            diff = np.abs(model.mobility(uq))
            speed = 0.0
        else:
            diff = np.abs(model.f(uq) * model.h_double_prime(uq))
            qx = (2.0 / h) * (q @ self.op.tabs.Vd.T)
            speed = float(np.max(np.abs(_finite_difference(model.f, uq) * qx)))
        dmax = float(np.max(diff))
        dt = c.dt_max
        if dmax > 0:
            dt = min(dt, c.c_of_k * h * h / dmax)
        if speed > 0:
            dt = min(dt, c.cfl * h / speed)
        if not math.isfinite(dt):
            dt = c.c_of_k * h * h
        return dt


def _record(report: RunReport, t: float, u: np.ndarray, ctx: SolverContext, entropy_fn, backend):
    mins = cell_minima(u, backend)
    report.record(
        t,
        entropy_fn(u),
        ctx.op.mesh.h * float(np.sum(u[:, 0])),
        float(u[:, 0].min()),
        float(mins.min()),
        float(u[:, 0].max()),
    )


def make_entropy_fn(op: DGOperator):
    V, w = op.tabs.V, op.tabs.w
    model, x_q, half_h = op.model, op.x_q, 0.5 * op.mesh.h

    def fn(u: np.ndarray) -> float:
        uq = u @ V.T
        return float(half_h * np.sum(model.entropy_density(uq, x_q) @ w))

    return fn


def _fail(report: RunReport, state: SolveState, message: str, exc=None):
    report.status = "failed"
    report.final_u = state.u
    report.final_q = state.q
    report.steps = state.step_index
    raise SolverFailure(message, report, state) from exc


def run(
    initial: DGField,
    model: ModelSpec,
    params: FluxParams,
    controller: TimeController,
    limiter: LimiterConfig = LimiterConfig(enabled=False),
    *,
    scheme: str = "heun",
    record_every: int = 1,
    snapshot_times: Sequence[float] = (),
    stop_on_negative_average: bool = False,
    stop_when_max_avg_exceeds: Optional[float] = None,
    limit_initial: bool = False,
    backend: Optional[str] = None,
    max_steps: Optional[int] = None,
    fused: Optional[bool] = None,
) -> RunReport:
    """Advance ``initial`` to ``controller.t_end`` and collect diagnostics.

    The last step is shortened so the run ends exactly at t_end.  With the
    static policies steps are likewise shortened to land on each requested
    snapshot time; adaptive runs store the snapshot at the first step that
    reaches it, keyed by the actual time.  On the
    compiled backend whole runs of steps between two recording points are
    taken inside the kernel (``fused``, default on); the Python step
    functions are used otherwise.  Both follow the same update sequence.
    """
    if scheme not in ("heun", "euler"):
        raise ValueError(f"scheme must be 'heun' or 'euler', got {scheme!r}")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    op = DGOperator(initial.mesh, initial.degree, model, params, backend=backend)
    params.check(initial.degree)
    report = RunReport()
    ctx = SolverContext(op, limiter, report)
    entropy_fn = make_entropy_fn(op)
    stepper = step_heun if scheme == "heun" else step_euler
    sizer = _StepSizer(controller, op, initial.degree)
    fused = op.compiled if fused is None else (fused and op.compiled)
    static_dt = controller.policy in ("fixed_ck", "explicit_dt")

    u = initial.coeffs.copy()
    if limit_initial and limiter.enabled:
        u = ctx.limit(u, 0.0)
    try:
        q = op.compute_q(u)
    except EvaluationDomainError as exc:
        _fail(report, _state(ctx, 0.0, 0, u, u), f"initial data: {exc}", exc)
    state = _state(ctx, 0.0, 0, u, q)
    _record(report, 0.0, u, ctx, entropy_fn, op.backend)

    targets = sorted(float(s) for s in snapshot_times if 0.0 <= s <= controller.t_end)
    for s in targets:
        if s == 0.0:
            report.snapshots[s] = state.u.copy()
    targets = [s for s in targets if s > 0.0]
    t_end = float(controller.t_end)
    eps = 1e-12 * max(1.0, abs(t_end))

    while state.t < t_end - eps:
        if max_steps is not None and state.step_index >= max_steps:
            report.status = "max_steps"
            break
        dt = sizer(state.u.coeffs, state.q.coeffs)
        if not (dt > 0 and math.isfinite(dt)):
            _fail(report, state, f"invalid time step {dt!r} at t={state.t}")
        target = targets[0] if targets else t_end
        landing = state.t + dt >= target - eps
        # adaptive steps are not shortened onto snapshot times: a short step
        # disturbs the step-size feedback near blow-up, so the snapshot is
        # taken at the first step reaching the requested time instead
        passing = landing and not static_dt and state.t + dt < t_end - eps
        if passing:
            n_steps = 1
        elif landing:
            if not static_dt:
                target = t_end
            dt = target - state.t
            n_steps = 1
        else:
            n_steps = 1
            if fused and static_dt:
                # full steps that stay short of the target, capped at the next record
                room = int((target - eps - state.t) / dt)
                to_record = record_every - state.step_index % record_every
                n_steps = max(1, min(room, to_record))
                if max_steps is not None:
                    n_steps = min(n_steps, max_steps - state.step_index)

        if fused:
            state = _advance_fused(state, dt, n_steps, ctx, scheme, stop_on_negative_average, report)
        else:
            try:
                new = stepper(state, dt, ctx)
            except (LimiterFailure, EvaluationDomainError) as exc:
                report.events.append(Event(state.t + dt, type(exc).__name__, getattr(exc, "cell", -1), str(exc)))
                _fail(report, state, f"t={state.t + dt:.7g}: {exc}", exc)
            if not np.all(np.isfinite(new.u.coeffs)):
                _fail(report, state, f"non-finite coefficients at t={new.t:.7g}")
            state = new
        if passing:
            while targets and state.t >= targets[0] - eps:
                targets.pop(0)
            report.snapshots[state.t] = state.u.copy()
        elif landing:
            state.t = target
            reached = False
            while targets and targets[0] <= target + eps:
                targets.pop(0)
                reached = True
            if reached:
                report.snapshots[target] = state.u.copy()
        done = state.t >= t_end - eps
        if done or state.step_index % record_every == 0:
            _record(report, state.t, state.u.coeffs, ctx, entropy_fn, op.backend)
        if stop_on_negative_average and report.first_below_delta_time is not None:
            report.status = "stopped_negative"
            break
        if stop_when_max_avg_exceeds is not None and state.u.coeffs[:, 0].max() > stop_when_max_avg_exceeds:
            report.status = "stopped_threshold"
            break

    if report.times[-1] != state.t:
        _record(report, state.t, state.u.coeffs, ctx, entropy_fn, op.backend)
    report.final_u = state.u
    report.final_q = state.q
    report.steps = state.step_index
    report.n_limited = ctx.n_limited
    return report


_FUSED_FAILURES = {1: "LimiterFailure", 2: "EvaluationDomainError", 3: "NonFinite"}


def _advance_fused(state, dt, n_steps, ctx: SolverContext, scheme, stop_below, report):
    op = ctx.op
    u = state.u.coeffs.copy()
    done, status, cell, first_below, first_neg, n_lim, n_flat, n_mass = op.advance(
        u, dt, n_steps, heun=scheme == "heun", limiter=ctx.limiter, stop_below=stop_below
    )
    ctx.n_limited += n_lim
    t0 = state.t
    times = t0 + dt * np.arange(1, n_steps + 1)
    if first_below >= 0 and report.first_below_delta_time is None:
        report.first_below_delta_time = float(times[first_below])
        ctx._note(report.first_below_delta_time, "avg_below_delta")
    if first_neg >= 0 and report.first_negative_time is None:
        report.first_negative_time = float(times[first_neg])
        ctx._note(report.first_negative_time, "avg_negative")
    if n_flat:
        ctx._note(float(times[max(done - 1, 0)]), "flatten", -1, f"{n_flat} cells, {n_mass} lifted to the floor")
    t = t0
    for _ in range(done):
        t += dt
    if status in _FUSED_FAILURES:
        before = _state(ctx, t, state.step_index + done, u, op.compute_q(u) if status != 2 else u)
        kind = _FUSED_FAILURES[status]
        report.events.append(Event(t + dt, kind, int(cell)))
        if status == 1:
            msg = f"t={t + dt:.7g}: cell {cell}: mean at or below floor {ctx.limiter.delta:.7g}, cannot reconstruct"
        elif status == 2:
            msg = f"t={t + dt:.7g}: H' not defined at a quadrature value in cell {cell}"
        else:
            msg = f"non-finite coefficients at t={t + dt:.7g}"
        _fail(report, before, msg)
    return _state(ctx, t, state.step_index + done, u, op.compute_q(u))
