import numpy as np
import pytest

from esdg.mesh_basis import Basis, build_mesh, gauss_quadrature, legendre_eval
from esdg.models import make_model
from esdg.projector import DGField, EvaluationDomainError, compute_q, project_l2


@pytest.fixture
def mesh():
    return build_mesh(-1.0, 1.0, 10)


def test_constant_projection(mesh):
    u = project_l2(lambda x: 3.5 + 0 * x, mesh, Basis(3))
    np.testing.assert_allclose(u.coeffs[:, 0], 3.5)
    np.testing.assert_allclose(u.coeffs[:, 1:], 0.0, atol=1e-15)


def test_linear_projection(mesh):
    u = project_l2(lambda x: x, mesh, Basis(2))
    np.testing.assert_allclose(u.coeffs[:, 0], mesh.centers, atol=1e-15)
    np.testing.assert_allclose(u.coeffs[:, 1], mesh.h / 2)
    np.testing.assert_allclose(u.coeffs[:, 2], 0.0, atol=1e-15)


def test_basis_reproduction(mesh):
    j = 4

    def l2_on_cell(x):
        xi = 2 * (x - mesh.centers[j]) / mesh.h
        inside = np.abs(xi) <= 1
        return np.where(inside, 0.5 * (3 * xi**2 - 1), 0.0)

    u = project_l2(l2_on_cell, mesh, Basis(2))
    np.testing.assert_allclose(u.coeffs[j], [0, 0, 1], atol=1e-14)


def test_best_approximation_orthogonality(mesh):
    g = lambda x: np.exp(x) * np.cos(4 * x)
    k = 2
    quad = gauss_quadrature(k + 2)
    u = project_l2(g, mesh, Basis(k), quad)
    x = mesh.map_to_physical(quad.nodes)
    L = legendre_eval(k, quad.nodes)[0]
    resid = ((g(x) - u.values_at(quad.nodes)) * quad.weights) @ L.T
    assert np.max(np.abs(resid)) < 1e-13


def test_field_shape_checked(mesh):
    with pytest.raises(ValueError):
        DGField(mesh, 2, np.zeros((10, 2)))


def test_field_evaluation(mesh, rng):
    c = rng.standard_normal((10, 3))
    u = DGField(mesh, 2, c)
    np.testing.assert_allclose(u.values_at([0.0])[:, 0], c[:, 0] - 0.5 * c[:, 2])
    np.testing.assert_allclose(u.cell_averages, c[:, 0])
    np.testing.assert_allclose(u(mesh.centers), u.values_at([0.0])[:, 0])
    # derivative of L1 in x is 2/h
    np.testing.assert_allclose(u.derivative_at([0.0])[:, 0], 2 / mesh.h * c[:, 1])


def test_compute_q_examples(mesh):
    # H' = u, Phi = 0 is porous medium m=2 with phi_quadratic = 0 on the q = u path
    u = project_l2(lambda x: 2.0 + 0 * x, mesh, Basis(2))
    q = compute_q(u, make_model("porous_medium", {"m": 2.0}))
    assert q.coeffs is not u.coeffs
    np.testing.assert_array_equal(q.coeffs, u.coeffs)
    zero = DGField(mesh, 2, np.zeros((10, 3)))
    # Phi(x) = x with H' vanishing at 0
    q = compute_q(zero, make_model("porous_medium_convection", {"m": 2.0}))
    np.testing.assert_allclose(q.coeffs[:, 0], mesh.centers, atol=1e-15)
    np.testing.assert_allclose(q.coeffs[:, 1], mesh.h / 2)


def test_compute_q_constant_state(mesh):
    model = make_model("double_well", {"nu": 1.0, "m": 2.0, "phi_quadratic": 0.0})
    u = project_l2(lambda x: 1.7 + 0 * x, mesh, Basis(3))
    np.testing.assert_allclose(compute_q(u, model).coeffs, u.coeffs, atol=1e-15)


def test_compute_q_exact_for_polynomial_data(mesh):
    # Phi quadratic and H' linear: Phi + H'(u_h) is in P^2 and is reproduced
    model = make_model("double_well", {"nu": 2.0, "m": 2.0, "phi_quadratic": 3.0})
    u = project_l2(lambda x: 1 + x - x**2, mesh, Basis(2))
    q = compute_q(u, model)
    want = project_l2(lambda x: 1.5 * x**2 + 2 * (1 + x - x**2), mesh, Basis(2))
    np.testing.assert_allclose(q.coeffs, want.coeffs, atol=1e-14)


def test_compute_q_domain_error(mesh):
    model = make_model("general_fp", {"N": 3.0})
    c = np.zeros((10, 3))
    c[:, 0] = 1.0
    c[6, 0] = -0.1
    with pytest.raises(EvaluationDomainError) as err:
        compute_q(DGField(mesh, 2, c), model)
    assert err.value.cell == 6
