"""Uniform 1D mesh, Legendre modal basis and Gauss-Legendre quadrature.

All reference-element quantities live on xi in [-1, 1]; a cell I_j is mapped
through x = x_j + (h/2) xi.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_QUADRATURE_POINTS = 16


@dataclass(frozen=True)
class Mesh:
    """Uniform partition of [a, b] into ``n_cells`` cells."""

    a: float
    b: float
    n_cells: int
    h: float = field(init=False)
    centers: np.ndarray = field(init=False, repr=False, compare=False)
    interfaces: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        h = (self.b - self.a) / self.n_cells
        interfaces = self.a + h * np.arange(self.n_cells + 1)
        interfaces[-1] = self.b
        centers = 0.5 * (interfaces[:-1] + interfaces[1:])
        interfaces.flags.writeable = False
        centers.flags.writeable = False
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "interfaces", interfaces)
        object.__setattr__(self, "centers", centers)

    @property
    def length(self) -> float:
        return self.b - self.a

    def map_to_physical(self, xi: np.ndarray) -> np.ndarray:
        """Physical coordinates of reference points, shape (n_cells, len(xi))."""
        return self.centers[:, None] + 0.5 * self.h * np.asarray(xi)[None, :]

    def locate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Cell index and reference coordinate for physical points."""
        x = np.asarray(x, dtype=float)
        j = np.clip(np.floor((x - self.a) / self.h).astype(int), 0, self.n_cells - 1)
        xi = 2.0 * (x - self.centers[j]) / self.h
        return j, np.clip(xi, -1.0, 1.0)


@dataclass(frozen=True)
class Basis:
    degree: int

    @property
    def n_modes(self) -> int:
        return self.degree + 1


@dataclass(frozen=True)
class Quadrature:
    n_points: int
    nodes: np.ndarray = field(repr=False, compare=False)
    weights: np.ndarray = field(repr=False, compare=False)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Reference-element integral along the last axis."""
        return values @ self.weights


def build_mesh(a: float, b: float, n_cells: int) -> Mesh:
    if not b > a:
        raise ValueError(f"need b > a, got a={a}, b={b}")
    if int(n_cells) != n_cells or n_cells < 2:
        raise ValueError(f"n_cells must be an integer >= 2, got {n_cells}")
    return Mesh(float(a), float(b), int(n_cells))


def legendre_eval(k: int, xi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values, first and second derivatives of L_0..L_k at ``xi``.

    Uses the three-term recurrence

        (i+1) L_{i+1} = (2i+1) xi L_i - i L_{i-1}

    differentiated once and twice, so any degree is handled by the same loop.
    ``xi`` may be a scalar or an array; outputs have shape ``(k+1,) + xi.shape``.
    """
    xi = np.asarray(xi, dtype=float)
    val = np.zeros((k + 1,) + xi.shape)
    d1 = np.zeros_like(val)
    d2 = np.zeros_like(val)
    val[0] = 1.0
    if k >= 1:
        val[1] = xi
        d1[1] = 1.0
    for i in range(1, k):
        a = (2 * i + 1) / (i + 1)
        b = i / (i + 1)
        val[i + 1] = a * xi * val[i] - b * val[i - 1]
        d1[i + 1] = a * (val[i] + xi * d1[i]) - b * d1[i - 1]
        d2[i + 1] = a * (2.0 * d1[i] + xi * d2[i]) - b * d2[i - 1]
    return val, d1, d2


def _legendre_and_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p_prev = np.ones_like(x)
    p = x.copy()
    for i in range(1, n):
        p_prev, p = p, ((2 * i + 1) * x * p - i * p_prev) / (i + 1)
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_quadrature(n_points: int) -> Quadrature:
    """Gauss-Legendre rule with ``n_points`` nodes on (-1, 1).

    Nodes are found by Newton iteration on the roots of L_Q, seeded by the
    Chebyshev-type estimate cos(pi (i - 1/4) / (Q + 1/2)).
    """
    if int(n_points) != n_points or not 1 <= n_points <= MAX_QUADRATURE_POINTS:
        raise ValueError(
            f"quadrature size must be in [1, {MAX_QUADRATURE_POINTS}], got {n_points}"
        )
    n = int(n_points)
    if n == 1:
        return Quadrature(1, np.array([0.0]), np.array([2.0]))
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p, dp = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    nodes, weights = x[order], w[order]
    # enforce exact symmetry of the rule
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    if n % 2:
        nodes[n // 2] = 0.0
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return Quadrature(n, nodes, weights)


def mass_matrix(basis: Basis, h: float) -> np.ndarray:
    """Diagonal cell mass matrix (h/2) int L L^T dxi = diag(h / (2i+1))."""
    i = np.arange(basis.n_modes)
    return np.diag(h / (2 * i + 1.0))
