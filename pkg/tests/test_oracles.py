"""Solver pieces against the independent oracles in oracles.py."""
import numpy as np
import pytest
from numpy.polynomial import legendre as npleg

from esdg.dg_operator import FluxParams, semi_discrete_rhs
from esdg.limiter import cell_minima
from esdg.mesh_basis import Basis, build_mesh, gauss_quadrature, legendre_eval
from esdg.models import make_model
from esdg.projector import DGField, project_l2

from oracles import brute_cell_min, project, weak_form_rhs


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("frame", ["physical", "reference"])
def test_rhs_matches_weak_form(k, frame, backend, rng):
    # f = u is integrated exactly by the solver's k+2 point rule
    model = make_model("porous_medium_convection", {"m": 2.0})
    params = FluxParams(3.0, 0.2, frame)
    mesh = build_mesh(-1.0, 1.0, 7)
    u = DGField(mesh, k, 1.0 + 0.3 * rng.standard_normal((7, k + 1)))
    q = DGField(mesh, k, rng.standard_normal((7, k + 1)))
    got = semi_discrete_rhs(u, q, model, params, backend=backend).coeffs
    want = weak_form_rhs(u.coeffs, q.coeffs, mesh.h, 3.0, params.effective_beta1, lambda v: v)
    np.testing.assert_allclose(got, want, rtol=1e-11, atol=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_rhs_matches_weak_form_trivial_path(k, backend, rng):
    # porous medium m=2 on the q = u path: mobility f H'' = 2u
    model = make_model("porous_medium", {"m": 2.0})
    params = FluxParams(2.0, 1.0 / 6.0)
    mesh = build_mesh(-1.0, 1.0, 6)
    u = DGField(mesh, k, 1.0 + 0.2 * rng.standard_normal((6, k + 1)))
    got = semi_discrete_rhs(u, u, model, params, backend=backend).coeffs
    want = weak_form_rhs(u.coeffs, u.coeffs, mesh.h, 2.0, 1.0 / 6.0, lambda v: 2.0 * v)
    np.testing.assert_allclose(got, want, rtol=1e-11, atol=1e-10)


@pytest.mark.parametrize("n", range(1, 17))
def test_quadrature_matches_numpy(n):
    quad = gauss_quadrature(n)
    s, w = npleg.leggauss(n)
    np.testing.assert_allclose(quad.nodes, s, atol=1e-14)
    np.testing.assert_allclose(quad.weights, w, atol=1e-14)


@pytest.mark.parametrize("k", range(0, 9))
def test_legendre_matches_numpy(k):
    xi = np.linspace(-1, 1, 17)
    val, d1, d2 = legendre_eval(k, xi)
    for i in range(k + 1):
        c = np.eye(k + 1)[i]
        np.testing.assert_allclose(val[i], npleg.legval(xi, c), atol=1e-13)
        np.testing.assert_allclose(d1[i], npleg.legval(xi, npleg.legder(c)), atol=1e-11)
        np.testing.assert_allclose(d2[i], npleg.legval(xi, npleg.legder(c, 2)), atol=1e-10)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_projection_matches_oracle(k):
    fn = lambda x: np.exp(np.sin(3 * x))
    mesh = build_mesh(-1.0, 2.0, 9)
    got = project_l2(fn, mesh, Basis(k), gauss_quadrature(12)).coeffs
    np.testing.assert_allclose(got, project(fn, -1.0, 2.0, 9, k), atol=1e-9)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_cell_min_matches_dense_sampling(k, backend, rng):
    c = rng.standard_normal((50, k + 1))
    got = cell_minima(c, backend)
    want = np.array([brute_cell_min(row) for row in c])
    assert np.all(got <= want + 1e-12)
    np.testing.assert_allclose(got, want, atol=1e-7)
