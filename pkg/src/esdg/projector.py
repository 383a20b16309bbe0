"""Modal DG fields and cell-wise L2 projection onto V_h."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .mesh_basis import Basis, Mesh, Quadrature, gauss_quadrature, legendre_eval
from .models import ModelSpec


class EvaluationDomainError(ArithmeticError):
    """A model function was evaluated outside its domain."""

    def __init__(self, cell: int, what: str = "H'"):
        self.cell = int(cell)
        super().__init__(f"{what} not defined at a quadrature value in cell {self.cell}")


@dataclass(frozen=True, eq=False)
class DGField:
    """Piecewise polynomial in modal Legendre form, coeffs[j, i] = u_j^i."""

    mesh: Mesh
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=float)
        if c.shape != (self.mesh.n_cells, self.degree + 1):
            raise ValueError(
                f"coefficient table must be {(self.mesh.n_cells, self.degree + 1)}, got {c.shape}"
            )
        object.__setattr__(self, "coeffs", c)

    @property
    def cell_averages(self) -> np.ndarray:
        return self.coeffs[:, 0]

    def values_at(self, xi) -> np.ndarray:
        """Values at reference points in every cell, shape (n_cells, len(xi))."""
        V, _, _ = legendre_eval(self.degree, np.atleast_1d(xi))
        return self.coeffs @ V

    def derivative_at(self, xi, order: int = 1) -> np.ndarray:
        """Physical x-derivatives at reference points, shape (n_cells, len(xi))."""
        tabs = legendre_eval(self.degree, np.atleast_1d(xi))
        return (2.0 / self.mesh.h) ** order * (self.coeffs @ tabs[order])

    def __call__(self, x) -> np.ndarray:
        """Pointwise evaluation; at an interface the right cell wins."""
        x = np.asarray(x, dtype=float)
        j, xi = self.mesh.locate(x.ravel())
        V, _, _ = legendre_eval(self.degree, xi)
        return np.einsum("ni,in->n", self.coeffs[j], V).reshape(x.shape)

    def with_coeffs(self, coeffs: np.ndarray) -> "DGField":
        return DGField(self.mesh, self.degree, coeffs)

    def copy(self) -> "DGField":
        return DGField(self.mesh, self.degree, self.coeffs.copy())


@lru_cache(maxsize=64)
def projection_tables(degree: int, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """(V, P): V[s, i] = L_i(s_s); P[i, s] = (2i+1)/2 w_s L_i(s_s)."""
    quad = gauss_quadrature(n_points)
    L, _, _ = legendre_eval(degree, quad.nodes)
    V = np.ascontiguousarray(L.T)
    P = np.ascontiguousarray((2 * np.arange(degree + 1)[:, None] + 1.0) / 2.0 * quad.weights * L)
    return V, P


def default_quadrature(degree: int) -> Quadrature:
    return gauss_quadrature(degree + 2)


def project_l2(
    g: Callable[[np.ndarray], np.ndarray],
    mesh: Mesh,
    basis: Basis,
    quad: Optional[Quadrature] = None,
) -> DGField:
    """L2 projection of ``g`` onto piecewise polynomials of degree k."""
    quad = quad or default_quadrature(basis.degree)
    _, P = projection_tables(basis.degree, quad.n_points)
    x = mesh.map_to_physical(quad.nodes)
    vals = np.asarray(g(x), dtype=float)
    if vals.shape != x.shape:
        vals = np.broadcast_to(vals, x.shape)
    return DGField(mesh, basis.degree, vals @ P.T)


def compute_q(u: DGField, model: ModelSpec, quad: Optional[Quadrature] = None) -> DGField:
    """q_h = cell-wise projection of Phi(x) + H'(u_h); q_h = u_h on the q = u path."""
    if model.trivial_potential_quadratic_H:
        return u.copy()
    quad = quad or default_quadrature(u.degree)
    V, P = projection_tables(u.degree, quad.n_points)
    uq = u.coeffs @ V.T
    if model.needs_positivity:
        bad = np.nonzero((uq <= 0.0).any(axis=1))[0]
        if bad.size:
            raise EvaluationDomainError(bad[0])
    vals = model.phi(u.mesh.map_to_physical(quad.nodes)) + model.h_prime(uq)
    finite = np.isfinite(vals).all(axis=1)
    if not finite.all():
        raise EvaluationDomainError(np.nonzero(~finite)[0][0])
    return u.with_coeffs(vals @ P.T)
