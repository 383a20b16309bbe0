"""Semi-discrete DG operator with the DDG flux for q_x.

The scheme for u_t = (f(u) q_x)_x, q = Phi + H'(u) reads, per cell I_j and
test function v in P^k,

    int u_t v = -int f q_x v_x + [{f} q^_x v + {f} v_x (q - {q})]_{dI_j}

with the numerical flux  q^_x = beta0 [q]/h + {q_x} + beta1 h [q_xx].
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .mesh_basis import Mesh, Quadrature, legendre_eval
from .models import KERNEL_CUSTOM, ModelSpec
from .projector import DGField, EvaluationDomainError, default_quadrature, projection_tables

log = logging.getLogger(__name__)


FRAMES = ("physical", "reference")
_WARNED: set = set()


@dataclass(frozen=True)
class FluxParams:
    """Flux parameters (beta0, beta1).

    ``second_jump_frame`` selects how the beta1 term is scaled.  "physical"
    uses beta1 h [q_xx] as written in the flux.  "reference" takes the jump of
    the second derivative in the reference variable, beta1 [q_xixi] / h,
    which equals the physical form with beta1 replaced by beta1 / 4.
    """

    beta0: float
    beta1: float = 0.0
    second_jump_frame: str = "physical"

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ValueError(f"beta0 must be positive, got {self.beta0}")
        if self.second_jump_frame not in FRAMES:
            raise ValueError(f"second_jump_frame must be one of {FRAMES}, got {self.second_jump_frame!r}")

    @property
    def effective_beta1(self) -> float:
        """beta1 of the equivalent flux in the physical frame."""
        return self.beta1 if self.second_jump_frame == "physical" else 0.25 * self.beta1

    def admissible(self, k: int) -> bool:
        """beta0 above the closed-form sufficient bound for entropy decay."""
        return k < 1 or self.beta0 > gamma_bound(k, self.effective_beta1)

    def check(self, k: int) -> bool:
        ok = self.admissible(k)
        if not ok and (self, k) not in _WARNED:
            _WARNED.add((self, k))
            log.warning(
                "beta0=%g is below the sufficient entropy bound %.4g for k=%d, beta1=%g",
                self.beta0, gamma_bound(k, self.effective_beta1), k, self.effective_beta1,
            )
        return ok


@dataclass(frozen=True)
class EdgeVectors:
    """D = b0 L(1) - L'(1) + 4 b1 L''(1),  E = b0 L(-1) + L'(-1) + 4 b1 L''(-1)."""

    d_vec: np.ndarray
    e_vec: np.ndarray


def edge_vectors(k: int, params: FluxParams) -> EdgeVectors:
    L, dL, ddL = legendre_eval(k, np.array([1.0, -1.0]))
    b1 = params.effective_beta1
    d = params.beta0 * L[:, 0] - dL[:, 0] + 4.0 * b1 * ddL[:, 0]
    e = params.beta0 * L[:, 1] + dL[:, 1] + 4.0 * b1 * ddL[:, 1]
    return EdgeVectors(d, e)


def interface_flux(q_left_trace, q_right_trace, params: FluxParams, h: float) -> float:
    """DDG flux from the one-sided traces (q, q_x, q_xx) left and right of a point."""
    qm, qxm, qxxm = q_left_trace
    qp, qxp, qxxp = q_right_trace
    return (
        params.beta0 * (qp - qm) / h
        + 0.5 * (qxp + qxm)
        + params.effective_beta1 * h * (qxxp - qxxm)
    )


class KernelTables:
    """Reference-element tables shared by both kernel backends."""

    def __init__(self, k: int, quad: Quadrature, params: FluxParams, h: float):
        nodes = quad.nodes
        L, dL, _ = legendre_eval(k, nodes)
        self.V, self.P = projection_tables(k, quad.n_points)
        self.Vd = np.ascontiguousarray(dL.T)
        self.w = np.ascontiguousarray(quad.weights, dtype=float)
        E, dE, ddE = legendre_eval(k, np.array([1.0, -1.0]))
        self.Lp1 = np.ascontiguousarray(E[:, 0])
        self.Lm1 = np.ascontiguousarray(E[:, 1])
        self.Dp1 = np.ascontiguousarray(dE[:, 0])
        self.Dm1 = np.ascontiguousarray(dE[:, 1])
        self.DDp1 = np.ascontiguousarray(ddE[:, 0])
        self.DDm1 = np.ascontiguousarray(ddE[:, 1])
        ev = edge_vectors(k, params)
        self.Dvec = np.ascontiguousarray(ev.d_vec)
        self.Evec = np.ascontiguousarray(ev.e_vec)
        self.minv = (2.0 * np.arange(k + 1) + 1.0) / h
        self.beta0 = float(params.beta0)
        self.beta1 = float(params.effective_beta1)


class DGOperator:
    """Spatial operator bound to one mesh, degree, model and flux.

    ``backend`` is "cython", "python" or None (use the import-time default).
    Custom models always run on the NumPy backend.
    """

    def __init__(
        self,
        mesh: Mesh,
        degree: int,
        model: ModelSpec,
        params: FluxParams,
        quad: Optional[Quadrature] = None,
        backend: Optional[str] = None,
    ):
        self.mesh = mesh
        self.degree = degree
        self.model = model
        self.params = params
        self.quad = quad or default_quadrature(degree)
        self.tabs = KernelTables(degree, self.quad, params, mesh.h)
        self.x_q = mesh.map_to_physical(self.quad.nodes)
        self.phi_q = np.ascontiguousarray(model.phi(self.x_q), dtype=float)
        self.trivial = bool(model.trivial_potential_quadratic_H)

        backend = backend or _kernels.BACKEND
        if backend not in ("cython", "python"):
            raise ValueError(f"unknown backend {backend!r}")
        if backend == "cython" and not _kernels.HAVE_COMPILED:
            raise RuntimeError("compiled kernels are not available")
        code, kparams = model.kernel
        self.compiled = backend == "cython" and code != KERNEL_CUSTOM and degree <= 3
        self.backend = "cython" if self.compiled else "python"

        self.dirichlet = None
        bc = model.bc
        if not bc.is_zero_flux:
            ua, ub = float(bc.left_value), float(bc.right_value)
            if self.trivial:
                qa, qb = ua, ub
            else:
                qa = float(model.phi(np.array(mesh.a)) + model.h_prime(np.array(ua)))
                qb = float(model.phi(np.array(mesh.b)) + model.h_prime(np.array(ub)))
            self.dirichlet = (
                float(model.mobility(np.array(ua))),
                float(model.mobility(np.array(ub))),
                qa,
                qb,
            )
        self._c = None
        if self.compiled:
            self._c = _kernels.compiled.CompiledOperator(
                self.tabs, self.phi_q, int(code), np.asarray(kparams, dtype=float),
                int(self.trivial), int(model.needs_positivity), float(mesh.h), self.dirichlet,
            )

    # -- kernels -----------------------------------------------------------
    def compute_q(self, u: np.ndarray) -> np.ndarray:
        if self.trivial:
            return u
        if self.compiled:
            u = np.ascontiguousarray(u, dtype=float)
            out = np.empty_like(u)
            bad = self._c.compute_q(u, out)
        else:
            out, bad = _kernels.py.compute_q(
                u, self.tabs, self.phi_q, self.model.h_prime, self.model.needs_positivity
            )
        if bad >= 0:
            raise EvaluationDomainError(bad)
        return out

    def rhs(self, u: np.ndarray, q: np.ndarray) -> np.ndarray:
        if self.compiled:
            u = np.ascontiguousarray(u, dtype=float)
            q = np.ascontiguousarray(q, dtype=float)
            out = np.empty_like(u)
            self._c.rhs(u, q, out)
            return out
        return _kernels.py.rhs(u, q, self.tabs, self.model.mobility, self.mesh.h, self.dirichlet)

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        """Time derivative of the coefficients, recomputing q from u."""
        return self.rhs(u, self.compute_q(u))

    def advance(self, u: np.ndarray, dt: float, n_steps: int, *, heun: bool = True,
                limiter=None, stop_below: bool = False):
        """Fused compiled stepping, see ``CompiledOperator.advance``.

        ``u`` is updated in place.  Only available on the compiled backend.
        """
        if not self.compiled:
            raise RuntimeError("fused stepping needs the compiled backend")
        from .limiter import FALLBACKS

        on = limiter is not None and limiter.enabled
        return self._c.advance(
            u, float(dt), int(n_steps), int(heun), int(on),
            int(on and limiter.per_stage), float(limiter.delta if on else 0.0),
            int(on and limiter.skip_zero_cells), FALLBACKS[limiter.fallback] if on else 0,
            int(stop_below),
        )

    # -- helpers -----------------------------------------------------------
    def traces(self, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(left, right) traces of every cell: values at xi = -1 and xi = +1."""
        return c @ self.tabs.Lm1, c @ self.tabs.Lp1

    def max_trace_mobility(self, u: np.ndarray) -> float:
        left, right = self.traces(u)
        return float(np.max(np.abs(self.model.mobility(np.concatenate([left, right])))))

    def interface_average_mobility(self, u: np.ndarray) -> np.ndarray:
        """{f} at the N+1 interfaces; zero at zero-flux boundaries."""
        left, right = self.traces(u)
        f = np.zeros(self.mesh.n_cells + 1)
        f[1:-1] = 0.5 * (self.model.mobility(right[:-1]) + self.model.mobility(left[1:]))
        return f


def semi_discrete_rhs(
    u: DGField,
    q: DGField,
    model: ModelSpec,
    params: FluxParams,
    quad: Optional[Quadrature] = None,
    backend: Optional[str] = None,
) -> DGField:
    """d/dt of the modal coefficients of u for a given q."""
    if q.mesh != u.mesh or q.degree != u.degree:
        raise ValueError("u and q must live on the same mesh with the same degree")
    op = DGOperator(u.mesh, u.degree, model, params, quad, backend)
    return u.with_coeffs(op.rhs(u.coeffs, q.coeffs))


def alpha_coefficients(params: FluxParams) -> tuple[float, float, float]:
    """Coefficients of the k = 2 flux written on the points {-1, 0, 1}.

    h q^_x at x_{j+1/2} = a3 p+(-1) + a2 p+(0) + a1 p+(1) - (a1 p(-1) + a2 p(0) + a3 p(1)).
    """
    b0, b1 = params.beta0, params.effective_beta1
    return (8.0 * b1 - 1.0) / 2.0, 2.0 * (1.0 - 4.0 * b1), b0 + (8.0 * b1 - 3.0) / 2.0


def cell_average_update_weights(p_minus, p, p_plus, f_left, f_right, mu, params: FluxParams):
    """Forward-Euler cell-average update of the k = 2, q = u scheme.

    ``p_minus``, ``p``, ``p_plus`` hold values at xi = (-1, 0, 1) in the left
    neighbour, the cell and the right neighbour; ``f_left``/``f_right`` are the
    interface mobilities {f}.  Returns ``(weights, new_average)`` where
    ``weights`` is 3x3 with rows (left neighbour, cell, right neighbour) and
    columns xi = (-1, 0, 1).  The weights sum to one.
    """
    a1, a2, a3 = alpha_coefficients(params)
    w = np.zeros((3, 3))
    w[0] = mu * f_left * np.array([a1, a2, a3])
    w[1] = [
        1.0 / 6.0 - mu * (a3 * f_left + a1 * f_right),
        2.0 / 3.0 - mu * a2 * (f_left + f_right),
        1.0 / 6.0 - mu * (a1 * f_left + a3 * f_right),
    ]
    w[2] = mu * f_right * np.array([a3, a2, a1])
    vals = np.array([p_minus, p, p_plus], dtype=float)
    return w, float(np.sum(w * vals))


def gamma_bound(k: int, beta1: float) -> float:
    """Closed-form sufficient bound on beta0: 2k^2 (1 - b1(k^2-1) + b1^2 (k^2-1)^2 / 3)."""
    if k < 1:
        raise ValueError("gamma_bound needs k >= 1")
    s = k * k - 1.0
    return 2.0 * k * k * (1.0 - beta1 * s + beta1 * beta1 * s * s / 3.0)


def in_positivity_range(params: FluxParams) -> bool:
    return 0.125 < params.effective_beta1 < 0.25 and params.beta0 >= 1.0


def cfl_positivity(params: FluxParams, f_max: float, allow_outside: bool = False) -> float:
    """Largest mesh ratio dt/h^2 keeping k = 2 cell averages in bounds.

    mu0 = 1 / (12 f_max) * min(1 / (b0 + 8 b1 - 2), 1 / (1 - 4 b1)).
    Outside 1/8 < b1 < 1/4, b0 >= 1 the bound carries no guarantee and is only
    returned when ``allow_outside`` is set (non-positive denominators are
    dropped from the min).
    """
    if not f_max > 0:
        raise ValueError(f"f_max must be positive, got {f_max}")
    if not in_positivity_range(params) and not allow_outside:
        raise ValueError(
            f"(beta0, beta1) = ({params.beta0}, {params.beta1}) outside 1/8 < beta1 < 1/4, beta0 >= 1"
        )
    b1 = params.effective_beta1
    terms = [params.beta0 + 8.0 * b1 - 2.0, 1.0 - 4.0 * b1]
    inv = [1.0 / t for t in terms if t > 0]
    if not inv:
        return math.inf
    return min(inv) / (12.0 * f_max)


def entropy_constant(k: int, params: FluxParams) -> float:
    """C(k, b0, b1) = 4(k+1)^2 (k(k+2) max(1, k^2/b0) + 8 max(b0, Gamma(2 b1)))."""
    return 4.0 * (k + 1) ** 2 * (
        k * (k + 2) * max(1.0, k * k / params.beta0)
        + 8.0 * max(params.beta0, gamma_bound(k, 2.0 * params.effective_beta1))
    )


def cfl_entropy(
    k: int,
    params: FluxParams,
    gamma: float = 0.5,
    hpp_max: float = 1.0,
    f_max: float = 1.0,
    h: float = 1.0,
) -> float:
    """Time step bound h^2 gamma / (C(k, b0, b1) max(0, H'') |f|) for discrete entropy decay."""
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if hpp_max <= 0 or f_max <= 0:
        return math.inf
    return h * h * gamma / (entropy_constant(k, params) * hpp_max * f_max)


def gamma_estimate(u: DGField, q: DGField, model: ModelSpec, params: FluxParams,
                   quad: Optional[Quadrature] = None) -> float:
    """Solution-dependent Gamma(beta1): the largest interface ratio

        {f} ({q_x} + beta1/2 h [q_xx])^2 / ((1/2h) int_{I_j u I_j+1} f q_x^2)

    over interior interfaces.  Diagnostic only.
    """
    quad = quad or default_quadrature(u.degree)
    h = u.mesh.h
    mob = model.mobility
    xq = quad.nodes
    uq = u.values_at(xq)
    qx = q.derivative_at(xq)
    cell_int = 0.5 * h * ((mob(uq) * qx * qx) @ quad.weights)
    ends = np.array([-1.0, 1.0])
    ut = u.values_at(ends)
    qx_t = q.derivative_at(ends, 1)
    qxx_t = q.derivative_at(ends, 2)
    favg = 0.5 * (mob(ut[:-1, 1]) + mob(ut[1:, 0]))
    num = favg * (
        0.5 * (qx_t[:-1, 1] + qx_t[1:, 0]) + 0.5 * params.effective_beta1 * h * (qxx_t[1:, 0] - qxx_t[:-1, 1])
    ) ** 2
    den = (cell_int[:-1] + cell_int[1:]) / (2.0 * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, np.where(num > 0, np.inf, 0.0))
    return float(np.max(ratio)) if ratio.size else 0.0


def spectral_radius(k: int, params: FluxParams, n_cells: int = 20) -> float:
    """h^2 times the spectral radius of the operator for u_t = u_xx.

    Built column by column on a zero-flux mesh with h = 1.  The result is
    mesh independent, so the explicit limit for diffusivity d is
    dt <= 2 h^2 / (rho d) for Heun's method.
    """
    tabs = KernelTables(k, default_quadrature(k), params, 1.0)
    n = n_cells * (k + 1)
    A = np.empty((n, n))
    ones = lambda u: np.ones_like(u)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        c = e.reshape(n_cells, k + 1)
        A[:, i] = _kernels.py.rhs(c, c, tabs, ones, 1.0).ravel()
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def stable_mesh_ratio(k: int, params: FluxParams, diffusivity_max: float, safety: float = 0.8) -> float:
    """Largest C in dt = C h^2 inside Heun's real stability interval [-2, 0]."""
    if not diffusivity_max > 0:
        raise ValueError("diffusivity_max must be positive")
    return safety * 2.0 / (spectral_radius(k, params) * diffusivity_max)
