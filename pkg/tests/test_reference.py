import numpy as np
import pytest

from esdg.dg_operator import DGOperator, FluxParams, stable_mesh_ratio
from esdg.diagnostics import l1_error
from esdg.mesh_basis import build_mesh
from esdg.models import make_model
from esdg.reference import banded_jacobian, jacobian_pattern, reference_solution


def test_pattern_is_block_tridiagonal():
    p = jacobian_pattern(4, 2).toarray()
    assert p.shape == (8, 8)
    assert p[0, 3] == 1 and p[0, 4] == 0 and p[7, 4] == 1 and p[7, 3] == 0


def test_banded_jacobian_matches_dense():
    model = make_model("porous_medium_convection", {"m": 2.0})
    mesh = build_mesh(-1, 1, 7)
    op = DGOperator(mesh, 2, model, FluxParams(4.0, 1 / 12))
    rng = np.random.default_rng(3)
    y = np.column_stack([1 + 0.2 * rng.random(7), 0.05 * rng.standard_normal((7, 2))]).ravel()
    fun = lambda v: op.evaluate(v.reshape(7, 3)).ravel()
    got = banded_jacobian(fun, y, 7, 3).toarray()
    f0 = fun(y)
    dense = np.empty((y.size, y.size))
    for i in range(y.size):
        step = 1e-7 * max(1.0, abs(y[i]))
        yp = y.copy()
        yp[i] += step
        dense[:, i] = (fun(yp) - f0) / step
    np.testing.assert_allclose(got, dense, rtol=1e-6, atol=1e-6 * np.abs(dense).max())


def test_implicit_and_explicit_agree():
    model = make_model("porous_medium_convection", {"m": 2.0})
    mesh = build_mesh(-1, 1, 10)
    p = FluxParams(9.0, 0.25)
    u0 = lambda x: 0.5 + 0.5 * np.sin(np.pi * x)
    imp = reference_solution(u0, mesh, model, p, 0.05)
    # the gap is the explicit O(dt^2) error, so halving the step quarters it
    gaps = [l1_error(imp, reference_solution(u0, mesh, model, p, 0.05, integrator="explicit",
                                             c_of_k=frac * stable_mesh_ratio(3, p, 2.0)))
            for frac in (0.5, 0.25)]
    assert gaps[1] < 1e-8
    assert 3.5 < gaps[0] / gaps[1] < 4.5

def test_unknown_integrator():
    with pytest.raises(ValueError):
        reference_solution(np.cos, build_mesh(0, 1, 4), make_model("porous_medium", {"m": 2.0}), FluxParams(1.0),
                           0.1, integrator="magic")
