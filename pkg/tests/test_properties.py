"""Randomized property suites, each over at least 100 instances."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from esdg.dg_operator import (
    DGOperator,
    FluxParams,
    alpha_coefficients,
    cell_average_update_weights,
    cfl_positivity,
    interface_flux,
)
from esdg.limiter import LimiterConfig, cell_minima, limit_coefficients
from esdg.mesh_basis import Basis, build_mesh, gauss_quadrature, legendre_eval
from esdg.models import make_model
from esdg.projector import DGField, project_l2

N_CELLS = 10
MANY = settings(max_examples=200)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
degrees = st.integers(1, 3)
lengths = st.floats(0.5, 20.0)


def coeff_arrays(k, n=N_CELLS, elements=finite):
    return arrays(np.float64, (n, k + 1), elements=elements)


@st.composite
def dg_fields(draw, n=N_CELLS):
    k = draw(degrees)
    a = draw(st.floats(-5, 5))
    length = draw(lengths)
    c = draw(coeff_arrays(k, n))
    return DGField(build_mesh(a, a + length, n), k, c)


def norms(u: DGField):
    """Broken L2 norm, broken H1 seminorm, jump and averaged-derivative sums (squared)."""
    k, h = u.degree, u.mesh.h
    quad = gauss_quadrature(k + 2)
    l2 = np.sum(h / (2 * np.arange(k + 1) + 1) * u.coeffs**2)
    dx = u.derivative_at(quad.nodes)
    h1 = 0.5 * h * np.sum((dx * dx) @ quad.weights)
    ends = np.array([-1.0, 1.0])
    v = u.values_at(ends)
    d = u.derivative_at(ends)
    jumps = np.sum((v[1:, 0] - v[:-1, 1]) ** 2)
    avg_dx = np.sum((0.5 * (d[1:, 0] + d[:-1, 1])) ** 2)
    return l2, h1, jumps, avg_dx


@MANY
@given(dg_fields())
def test_inverse_inequalities(u):
    k, h = u.degree, u.mesh.h
    l2, h1, jumps, avg_dx = norms(u)
    slack = 1e-12 * (1 + l2) / h**3
    assert h1 <= k * (k + 1) ** 2 * (k + 2) / h**2 * l2 + slack
    assert jumps <= 4 * (k + 1) ** 2 / h * l2 + slack
    assert avg_dx <= k**3 * (k + 1) ** 2 * (k + 2) / h**3 * l2 + slack


@MANY
@given(st.floats(0.01, 100), st.floats(-10, 10))
def test_alpha_identity(beta0, beta1):
    a = alpha_coefficients(FluxParams(beta0, beta1))
    assert abs(sum(a) - beta0) <= 1e-12 * max(1.0, beta0, abs(beta1))


@MANY
@given(degrees, arrays(np.float64, 4, elements=st.floats(-3, 3)), st.floats(0.05, 1.0),
       st.floats(0.1, 20), st.floats(-1, 1), st.sampled_from(["physical", "reference"]))
def test_flux_consistency_on_global_polynomials(k, poly, h, beta0, beta1, frame):
    poly = poly[: k + 1]
    p = np.polynomial.Polynomial(poly)
    mesh = build_mesh(-1.0, -1.0 + 4 * h, 4)
    u = project_l2(p, mesh, Basis(k), gauss_quadrature(k + 2))
    val, d1, d2 = legendre_eval(k, np.array([-1.0, 1.0]))
    s = 2.0 / h
    params = FluxParams(beta0, beta1, frame)
    for j in range(3):
        left = u.coeffs[j] @ np.column_stack([val[:, 1], s * d1[:, 1], s * s * d2[:, 1]])
        right = u.coeffs[j + 1] @ np.column_stack([val[:, 0], s * d1[:, 0], s * s * d2[:, 0]])
        x = mesh.interfaces[j + 1]
        got = interface_flux(left, right, params, h)
        scale = 1.0 + np.sum(np.abs(poly)) * (1 + beta0 + abs(beta1))
        assert abs(got - p.deriv()(x)) < 1e-12 * scale / h


@MANY
@given(st.integers(0, 3).flatmap(lambda k: coeff_arrays(k, 12)), st.floats(0.0, 0.5))
def test_limiter_average_floor_idempotence(c, delta):
    c = c.copy()
    c[:, 0] = np.abs(c[:, 0]) + delta + 1e-3
    cfg = LimiterConfig(delta)
    out, _, _ = limit_coefficients(c, cfg)
    assert np.max(np.abs(out[:, 0] - c[:, 0])) < 1e-14 * max(1.0, np.max(np.abs(c[:, 0])))
    assert np.all(cell_minima(out) >= delta - 1e-13 * max(1.0, np.max(np.abs(c))))
    again, _, _ = limit_coefficients(out, cfg)
    np.testing.assert_allclose(again, out, rtol=0, atol=1e-13 * max(1.0, np.max(np.abs(c))))


def from_point_values(vals):
    """Quadratic modal coefficients from values at xi = -1, 0, 1 (rows are cells)."""
    V = legendre_eval(2, np.array([-1.0, 0.0, 1.0]))[0]  # (3 modes, 3 points)
    return np.linalg.solve(V.T, vals.T).T


admissible = st.tuples(st.floats(1.0, 10.0), st.floats(0.126, 0.249))


@MANY
@given(arrays(np.float64, (N_CELLS, 3), elements=st.floats(0.1, 5.0)), admissible, st.floats(0.0, 1.0),
       st.sampled_from(["python", "cython"]))
def test_k2_weights_match_assembly(vals, beta, frac, backend):
    model = make_model("porous_medium", {"m": 2.0})  # q = u path with mobility 2u
    params = FluxParams(*beta)
    mesh = build_mesh(0.0, 1.0, N_CELLS)
    c = from_point_values(vals)
    op = DGOperator(mesh, 2, model, params, backend=backend)
    fbar = 0.5 * (model.mobility(vals[:-1, 2]) + model.mobility(vals[1:, 0]))
    mu = frac * cfl_positivity(params, float(fbar.max()))
    dt = mu * mesh.h**2
    assembled = c[:, 0] + dt * op.evaluate(c)[:, 0]
    for j in range(1, N_CELLS - 1):
        _, avg = cell_average_update_weights(vals[j - 1], vals[j], vals[j + 1], fbar[j - 1], fbar[j], mu, params)
        assert abs(avg - assembled[j]) < 1e-12 * max(1.0, np.max(vals))


@MANY
@given(arrays(np.float64, (N_CELLS, 3), elements=st.floats(0.0, 1.0)), admissible, st.floats(0.0, 1.0),
       st.floats(0.01, 1.0), st.floats(0.0, 3.0))
def test_positivity_of_cell_averages(unit, beta, frac, c1, width):
    # point values in [c1, c2] and mu <= mu0 keep every new average in [c1, c2]
    c2 = c1 + width
    vals = c1 + width * unit
    model = make_model("porous_medium", {"m": 2.0})
    params = FluxParams(*beta)
    mesh = build_mesh(0.0, 1.0, N_CELLS)
    c = from_point_values(vals)
    fbar = 0.5 * (model.mobility(vals[:-1, 2]) + model.mobility(vals[1:, 0]))
    mu = frac * cfl_positivity(params, float(fbar.max()))
    new = c[:, 0] + mu * mesh.h**2 * DGOperator(mesh, 2, model, params).evaluate(c)[:, 0]
    tol = 1e-12 * max(1.0, c2)
    assert np.all(new >= c1 - tol) and np.all(new <= c2 + tol)


@MANY
@given(dg_fields(), st.integers(0, 2))
def test_projection_idempotence(u, extra):
    quad = gauss_quadrature(u.degree + 1 + extra)
    again = project_l2(u, u.mesh, Basis(u.degree), quad)
    assert np.max(np.abs(again.coeffs - u.coeffs)) < 1e-13 * max(1.0, np.max(np.abs(u.coeffs)))
