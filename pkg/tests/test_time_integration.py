import numpy as np
import pytest

from esdg.dg_operator import DGOperator, FluxParams, stable_mesh_ratio
from esdg.diagnostics import l1_error
from esdg.limiter import LimiterConfig
from esdg.mesh_basis import Basis, build_mesh
from esdg.models import make_model
from esdg.projector import compute_q, project_l2
from esdg.time_integration import (
    SolverContext,
    SolverFailure,
    SolveState,
    TimeController,
    run,
    step_euler,
    step_heun,
)

HEAT = dict(
    f=lambda u: np.ones_like(u),
    h_entropy=lambda u: 0.5 * u**2,
    h_prime=lambda u: u,
    h_double_prime=lambda u: np.ones_like(u),
    phi=lambda x: 0 * x,
)


def heat_setup(k=2, n=8, backend=None):
    model = make_model("custom", {"label": "heat"}, **HEAT)
    mesh = build_mesh(-1, 1, n)
    op = DGOperator(mesh, k, model, FluxParams(4.0, 1 / 12), backend=backend)
    u = project_l2(lambda x: 1 + 0.5 * np.cos(np.pi * x), mesh, Basis(k))
    return model, op, u


def state_of(op, u):
    return SolveState(0.0, 0, u, compute_q(u, op.model))


def operator_matrix(op, shape):
    n = int(np.prod(shape))
    cols = [op.evaluate(np.eye(n)[i].reshape(shape)).ravel() for i in range(n)]
    return np.array(cols).T


def test_heun_amplification_is_second_order_taylor(backend):
    _, op, u = heat_setup(backend=backend)
    L = operator_matrix(op, u.coeffs.shape)
    dt = 0.3 * stable_mesh_ratio(2, op.params, 1.0) * op.mesh.h**2
    a = u.coeffs.ravel()
    want = a + dt * L @ a + 0.5 * dt**2 * L @ (L @ a)
    got = step_heun(state_of(op, u), dt, SolverContext(op)).u.coeffs.ravel()
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)
    got = step_euler(state_of(op, u), dt, SolverContext(op)).u.coeffs.ravel()
    np.testing.assert_allclose(got, a + dt * L @ a, rtol=1e-12, atol=1e-12)


def test_zero_step_is_identity():
    _, op, u = heat_setup()
    for step in (step_euler, step_heun):
        new = step(state_of(op, u), 0.0, SolverContext(op))
        np.testing.assert_array_equal(new.u.coeffs, u.coeffs)
        assert new.t == 0.0 and new.step_index == 0
        with pytest.raises(ValueError):
            step(state_of(op, u), -1e-3, SolverContext(op))


def test_steady_state_unchanged():
    model = make_model("double_well", {"nu": 1.0, "m": 2.0, "phi_quadratic": 1.0})
    mesh = build_mesh(-2, 2, 20)
    u = project_l2(lambda x: 3 - 0.5 * x**2, mesh, Basis(2))
    op = DGOperator(mesh, 2, model, FluxParams(4.0, 1 / 12))
    dt = 0.5 * stable_mesh_ratio(2, op.params, 3.5) * mesh.h**2
    new = step_heun(state_of(op, u), dt, SolverContext(op))
    assert np.max(np.abs(new.u.coeffs - u.coeffs)) < 1e-12
    assert new.t == pytest.approx(dt)


def test_euler_cell_average_matches_flux_sum():
    # mode-0 row: mean change is dt/h times the net interface flux
    model, op, u = heat_setup(k=1, n=6)
    dt = 1e-4
    new = step_euler(state_of(op, u), dt, SolverContext(op))
    mass_rate = op.mesh.h * (new.u.coeffs[:, 0] - u.coeffs[:, 0]).sum() / dt
    assert abs(mass_rate) < 1e-10


def test_heun_minus_euler_is_second_order():
    _, op, u = heat_setup()
    diffs = []
    for dt in (4e-4, 2e-4, 1e-4):
        e = step_euler(state_of(op, u), dt, SolverContext(op)).u.coeffs
        h = step_heun(state_of(op, u), dt, SolverContext(op)).u.coeffs
        diffs.append(np.max(np.abs(h - e)))
    orders = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
    np.testing.assert_allclose(orders, 2.0, atol=0.05)


def test_time_step_halving_order():
    model = make_model("porous_medium_convection", {"m": 2.0})
    mesh = build_mesh(-1, 1, 20)
    u0 = project_l2(lambda x: 0.5 + 0.5 * np.sin(np.pi * x), mesh, Basis(2))
    p = FluxParams(4.0, 1 / 12)
    dt0 = 0.5 * stable_mesh_ratio(2, p, 2.0) * mesh.h**2
    finals = []
    for dt in (dt0, dt0 / 2, dt0 / 4):
        rep = run(u0, model, p, TimeController(0.25, "explicit_dt", dt=dt), LimiterConfig(0.0), record_every=10**6)
        finals.append(rep.final_u)
    d1 = l1_error(finals[0], finals[1])
    d2 = l1_error(finals[1], finals[2])
    assert np.log2(d1 / d2) >= 1.8


def test_t_end_zero():
    model, op, u = heat_setup()
    rep = run(u, model, op.params, TimeController(0.0, "fixed_ck", c_of_k=0.01))
    assert rep.times == [0.0]
    assert rep.steps == 0


@pytest.mark.parametrize("policy,kw", [("fixed_ck", {"c_of_k": 0.0013}), ("explicit_dt", {"dt": 7e-5}),
                                       ("adaptive", {"c_of_k": 0.01}), ("positivity_cfl", {"safety": 0.1})])
def test_exact_landing(policy, kw, backend):
    model, op, u = heat_setup(backend=backend)
    params = FluxParams(2.0, 1 / 6)
    rep = run(u, model, params, TimeController(0.0123, policy, **kw), backend=backend, record_every=7)
    assert abs(rep.final_time - 0.0123) < 1e-14
    assert np.all(np.diff(rep.times) > 0)


def test_snapshots_static_policy_land_exactly():
    model, op, u = heat_setup()
    rep = run(u, model, op.params, TimeController(0.01, "explicit_dt", dt=3e-4), snapshot_times=[0.0, 0.0041, 0.01])
    assert sorted(rep.snapshots) == [0.0, 0.0041, 0.01]


def test_snapshots_adaptive_policy_keyed_by_actual_time():
    model, op, u = heat_setup()
    rep = run(u, model, op.params, TimeController(0.01, "adaptive", c_of_k=0.01),
              snapshot_times=[0.0041, 0.00999999])
    keys = sorted(rep.snapshots)
    assert len(keys) == 2
    assert 0.0041 <= keys[0] < 0.0041 + 0.01 * op.mesh.h**2 + 1e-15
    assert keys[1] == 0.01
    assert abs(rep.final_time - 0.01) < 1e-14


def test_controller_validation():
    with pytest.raises(ValueError):
        TimeController(1.0, "implicit")
    with pytest.raises(ValueError):
        TimeController(-1.0)
    with pytest.raises(ValueError):
        TimeController(1.0, "explicit_dt")
    assert TimeController(1.0, "explicit_dt", dt=0.01).mu(0.1) == pytest.approx(1.0)
    assert TimeController(1.0, "fixed_ck", c_of_k=0.2).mu(0.1) == 0.2
    assert TimeController(1.0, "adaptive").mu(0.1) is None


def test_run_rejects_bad_arguments():
    model, op, u = heat_setup()
    with pytest.raises(ValueError):
        run(u, model, op.params, TimeController(0.1), scheme="rk4")
    with pytest.raises(ValueError):
        run(u, model, op.params, TimeController(0.1), record_every=0)


@pytest.mark.parametrize("fused", [False, True])
def test_limiter_failure_aborts_with_report(fused):
    # an oversized step drives a cell mean negative
    model = make_model("porous_medium", {"m": 2.0})
    mesh = build_mesh(-1, 1, 20)
    u = project_l2(lambda x: 1e-6 + np.exp(-50 * x * x), mesh, Basis(2))
    with pytest.raises(SolverFailure) as err:
        run(u, model, FluxParams(2.0, 1 / 6), TimeController(1.0, "explicit_dt", dt=0.05),
            LimiterConfig(0.0), fused=fused)
    rep = err.value.report
    assert rep.status == "failed"
    assert rep.final_u is not None
    assert rep.events


def test_stop_on_negative_average():
    model = make_model("porous_medium", {"m": 2.0})
    mesh = build_mesh(-1, 1, 20)
    u = project_l2(lambda x: 1e-6 + np.exp(-50 * x * x), mesh, Basis(2))
    rep = run(u, model, FluxParams(2.0, 1 / 6), TimeController(1.0, "explicit_dt", dt=0.05),
              stop_on_negative_average=True)
    assert rep.status == "stopped_negative"
    assert rep.first_negative_time is not None


def test_max_steps():
    model, op, u = heat_setup()
    rep = run(u, model, op.params, TimeController(1.0, "explicit_dt", dt=1e-5), max_steps=5)
    assert rep.status == "max_steps" and rep.steps == 5


def test_heun_keeps_averages_positive_under_positivity_cfl():
    # k = 2 trivial-potential path with the convex-combination CFL
    model = make_model("porous_medium", {"m": 2.0})
    mesh = build_mesh(-2, 2, 20)
    u = project_l2(lambda x: 1e-5 * (1 + 30 * np.exp(-25 * x * x)), mesh, Basis(2))
    lim = LimiterConfig(1e-10)
    rep = run(u, model, FluxParams(2.0, 1 / 6), TimeController(20.0, "positivity_cfl"), lim,
              limit_initial=True, record_every=1)
    assert rep.status == "completed"
    assert min(rep.min_avg_series) >= 1e-10
    assert rep.first_below_delta_time is None
