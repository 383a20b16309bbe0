"""Entropy, mass, entropy norm of q, l1 errors and observed orders."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .dg_operator import FluxParams
from .mesh_basis import Quadrature, gauss_quadrature
from .models import ModelSpec
from .projector import DGField, EvaluationDomainError, default_quadrature, projection_tables


@dataclass
class Event:
    time: float
    kind: str
    cell: int = -1
    detail: str = ""

    def as_dict(self) -> dict:
        return {"time": self.time, "kind": self.kind, "cell": self.cell, "detail": self.detail}


@dataclass
class RunReport:
    times: list = field(default_factory=list)
    entropy_series: list = field(default_factory=list)
    mass_series: list = field(default_factory=list)
    min_avg_series: list = field(default_factory=list)
    min_value_series: list = field(default_factory=list)
    max_avg_series: list = field(default_factory=list)
    final_u: Optional[DGField] = None
    events: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    status: str = "completed"
    steps: int = 0
    first_below_delta_time: Optional[float] = None
    first_negative_time: Optional[float] = None
    n_limited: int = 0
    final_q: Optional[DGField] = None

    def record(self, t, entropy_value, mass_value, min_avg, min_value, max_avg):
        self.times.append(float(t))
        self.entropy_series.append(float(entropy_value))
        self.mass_series.append(float(mass_value))
        self.min_avg_series.append(float(min_avg))
        self.min_value_series.append(float(min_value))
        self.max_avg_series.append(float(max_avg))

    def arrays(self) -> dict:
        return {
            "t": np.asarray(self.times),
            "entropy": np.asarray(self.entropy_series),
            "mass": np.asarray(self.mass_series),
            "min_cell_avg": np.asarray(self.min_avg_series),
            "min_cell_value": np.asarray(self.min_value_series),
            "max_cell_avg": np.asarray(self.max_avg_series),
        }

    @property
    def final_time(self) -> float:
        return self.times[-1] if self.times else 0.0

    def entropy_increases(self, rtol: float = 1e-10) -> np.ndarray:
        """Indices n with E^{n+1} > E^n + rtol * max(1, |E^n|)."""
        e = np.asarray(self.entropy_series)
        if e.size < 2:
            return np.empty(0, dtype=int)
        tol = rtol * np.maximum(1.0, np.abs(e[:-1]))
        return np.nonzero(np.diff(e) > tol)[0]

    def relative_mass_drift(self) -> float:
        m = np.asarray(self.mass_series)
        if m.size == 0:
            return 0.0
        scale = abs(m[0]) if m[0] != 0 else 1.0
        return float(np.max(np.abs(m - m[0])) / scale)


def _quad_tables(degree: int, quad: Optional[Quadrature]):
    quad = quad or default_quadrature(degree)
    V, _ = projection_tables(degree, quad.n_points)
    return quad, V


def entropy(u: DGField, model: ModelSpec, quad: Optional[Quadrature] = None) -> float:
    """Discrete free energy sum_j int_{I_j} (Phi u_h + H(u_h)) dx."""
    quad, V = _quad_tables(u.degree, quad)
    uq = u.coeffs @ V.T
    x = u.mesh.map_to_physical(quad.nodes)
    if model.needs_positivity and not model.trivial_potential_quadratic_H:
        bad = np.nonzero((uq <= 0.0).any(axis=1))[0]
        if bad.size:
            raise EvaluationDomainError(bad[0], "H")
    dens = model.entropy_density(uq, x)
    return float(0.5 * u.mesh.h * np.sum(dens @ quad.weights))


def mass(u: DGField) -> float:
    return float(u.mesh.h * np.sum(u.coeffs[:, 0]))


def entropy_norm_q(
    q: DGField,
    u: DGField,
    model: ModelSpec,
    params: FluxParams,
    quad: Optional[Quadrature] = None,
) -> float:
    """Squared entropy norm: sum int f(u) q_x^2 + sum_interior {f} beta0/h [q]^2."""
    quad = quad or default_quadrature(u.degree)
    h = u.mesh.h
    mob = model.mobility
    fq = mob(u.values_at(quad.nodes))
    qx = q.derivative_at(quad.nodes)
    volume = 0.5 * h * np.sum((fq * qx * qx) @ quad.weights)
    ends = np.array([-1.0, 1.0])
    ut = u.values_at(ends)
    qt = q.values_at(ends)
    favg = 0.5 * (mob(ut[:-1, 1]) + mob(ut[1:, 0]))
    jump = qt[1:, 0] - qt[:-1, 1]
    return float(volume + np.sum(favg * params.beta0 / h * jump * jump))


def interface_jumps(q: DGField) -> np.ndarray:
    ends = np.array([-1.0, 1.0])
    qt = q.values_at(ends)
    return qt[1:, 0] - qt[:-1, 1]


Reference = Union[Callable[[np.ndarray], np.ndarray], DGField]


def l1_error(u: DGField, reference: Reference, n_points: int = 4) -> float:
    """sum_j int_{I_j} |u_h - u_ref| dx with an n-point Gauss rule per cell."""
    quad = gauss_quadrature(n_points)
    x = u.mesh.map_to_physical(quad.nodes)
    uh = u.values_at(quad.nodes)
    ref = reference(x) if callable(reference) else None
    if ref is None:
        raise TypeError("reference must be callable or a DGField")
    ref = np.broadcast_to(np.asarray(ref, dtype=float), x.shape)
    return float(0.5 * u.mesh.h * np.sum(np.abs(uh - ref) @ quad.weights))


def convergence_orders(errors, hs) -> np.ndarray:
    """Observed orders log(e_i / e_{i+1}) / log(h_i / h_{i+1})."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(hs, dtype=float)
    if e.shape != h.shape or e.size < 2:
        raise ValueError("need matching error and mesh-size vectors of length >= 2")
    if np.any(e <= 0):
        raise ValueError("errors must be positive")
    if np.any(np.diff(h) >= 0):
        raise ValueError("mesh sizes must be strictly decreasing")
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])
