"""Registry of gradient-flow Fokker-Planck models.

Every model is the tuple (f, H, H', H'', Phi) of

    u_t = (f(u) (Phi(x) + H'(u))_x)_x

together with its boundary condition.  Built-in models also carry a
``kernel`` descriptor so the compiled backend can evaluate f, H', H'' without
calling back into Python.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.special import hyp2f1

ScalarFn = Callable[[np.ndarray], np.ndarray]

# kernel families understood by the compiled backend
KERNEL_CUSTOM = 0
KERNEL_POWER = 1  # f = a*u^r, H' = b*u^s
KERNEL_FP = 2  # f = u(1 + kappa*u^N), H' = log(u) - log(1 + kappa*u^N)/N

LOG_FLOOR = 1e-12

MODEL_NAMES = (
    "porous_medium",
    "porous_medium_convection",
    "double_well",
    "boson_fermion",
    "general_fp",
    "custom",
)


class ModelError(ValueError):
    """Unknown model name or invalid model parameters."""


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str = "zero_flux"
    left_value: Optional[float] = None
    right_value: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("zero_flux", "dirichlet"):
            raise ModelError(f"unknown boundary condition kind {self.kind!r}")
        if self.kind == "dirichlet" and (self.left_value is None or self.right_value is None):
            raise ModelError("dirichlet boundary condition needs both boundary values")

    @property
    def is_zero_flux(self) -> bool:
        return self.kind == "zero_flux"


ZERO_FLUX = BoundaryCondition()


@dataclass(frozen=True)
class ModelSpec:
    name: str
    f: ScalarFn
    h_entropy: ScalarFn
    h_prime: ScalarFn
    h_double_prime: ScalarFn
    phi: ScalarFn
    phi_is_polynomial_degree: Optional[int] = None
    bc: BoundaryCondition = ZERO_FLUX
    trivial_potential_quadratic_H: bool = False
    params: Mapping[str, float] = field(default_factory=dict)
    kernel: tuple = (KERNEL_CUSTOM, ())
    needs_positivity: bool = False

    def mobility(self, u):
        """Mobility used by the scheme: f, or f*H'' on the q = u path."""
        if self.trivial_potential_quadratic_H:
            return self.f(u) * self.h_double_prime(u)
        return self.f(u)

    def entropy_density(self, u, x):
        """Integrand of the free energy dissipated by the scheme.

        On the q = u path the scheme is the gradient flow of int u^2/2 with
        mobility f*H'', so that is the quantity tracked.
        """
        if self.trivial_potential_quadratic_H:
            return 0.5 * u * u
        return self.h_entropy(u) + u * self.phi(x)

    def with_bc(self, bc: BoundaryCondition) -> "ModelSpec":
        from dataclasses import replace

        return replace(self, bc=bc)


def _pw(u, p: float):
    """u**p, sign-preserving for integer exponents, clipped at 0 otherwise."""
    u = np.asarray(u, dtype=float)
    if float(p).is_integer():
        return u ** int(p)
    return np.maximum(u, 0.0) ** p


def _power_model(name, a, r, b, s, phi, phi_degree, trivial, params, bc):
    def f(u):
        return a * _pw(u, r)

    def hp(u):
        return b * _pw(u, s)

    def hpp(u):
        return b * s * _pw(u, s - 1.0)

    def hh(u):
        return b * _pw(u, s + 1.0) / (s + 1.0)

    return ModelSpec(
        name=name,
        f=f,
        h_entropy=hh,
        h_prime=hp,
        h_double_prime=hpp,
        phi=phi,
        phi_is_polynomial_degree=phi_degree,
        bc=bc,
        trivial_potential_quadratic_H=trivial,
        params=dict(params),
        kernel=(KERNEL_POWER, (float(a), float(r), float(b), float(s))),
    )


def _fp_antiderivative_term(u, kappa, n):
    """int_0^u ds / (1 + kappa s^n), closed form through 2F1."""
    return u * hyp2f1(1.0, 1.0 / n, 1.0 + 1.0 / n, -kappa * u**n)


def _fp_model(name, kappa, n, params, bc):
    def f(u):
        u = np.asarray(u, dtype=float)
        return u * (1.0 + kappa * u**n)

    def hp(u):
        u = np.maximum(np.asarray(u, dtype=float), LOG_FLOOR)
        return np.log(u) - np.log1p(kappa * u**n) / n

    def hpp(u):
        u = np.maximum(np.asarray(u, dtype=float), LOG_FLOOR)
        return 1.0 / (u * (1.0 + kappa * u**n))

    def hh(u):
        u = np.maximum(np.asarray(u, dtype=float), LOG_FLOOR)
        return (
            u * np.log(u)
            - u * np.log1p(kappa * u**n) / n
            - _fp_antiderivative_term(u, kappa, n)
        )

    def phi(x):
        return 0.5 * np.asarray(x, dtype=float) ** 2

    return ModelSpec(
        name=name,
        f=f,
        h_entropy=hh,
        h_prime=hp,
        h_double_prime=hpp,
        phi=phi,
        phi_is_polynomial_degree=2,
        bc=bc,
        trivial_potential_quadratic_H=False,
        params=dict(params),
        kernel=(KERNEL_FP, (float(kappa), float(n))),
        needs_positivity=True,
    )


def _quadratic_phi(c: float) -> ScalarFn:
    def phi(x):
        return 0.5 * c * np.asarray(x, dtype=float) ** 2

    return phi


def _require(params, *keys):
    missing = [k for k in keys if k not in params]
    if missing:
        raise ModelError(f"missing model parameter(s): {', '.join(missing)}")


def make_model(
    name: str,
    params: Optional[Mapping[str, float]] = None,
    bc: BoundaryCondition = ZERO_FLUX,
    **callables: ScalarFn,
) -> ModelSpec:
    """Build one of the registered models.

    ``porous_medium(m)``
        u_t = (u^m)_xx written as u_t = (m u^{m-1} u_x)_x, i.e. f = m u^{m-1},
        H = u^2/2.  With ``phi_quadratic = c`` the potential c x^2/2 is added.
        Without a potential the model takes the q = u path.
    ``porous_medium_convection(m)``
        f = u, Phi = x, H = u^m/(m-1).
    ``double_well(nu, m)``
        f = u, H' = nu u^{m-1}, Phi = x^4/4 - x^2/2 (or c x^2/2 when
        ``phi_quadratic`` is given).
    ``general_fp(N)`` / ``boson_fermion(k_sign)``
        f = u(1 + kappa u^N), Phi = x^2/2, H' = log(u / (1 + kappa u^N)^{1/N}).
    ``custom``
        pass ``f``, ``h_entropy``, ``h_prime``, ``h_double_prime``, ``phi`` as
        keyword callables.
    """
    params = dict(params or {})
    if name == "porous_medium":
        _require(params, "m")
        m = float(params["m"])
        if m <= 1:
            raise ModelError(f"porous medium exponent must exceed 1, got m={m}")
        c = float(params.get("phi_quadratic", 0.0))
        if c == 0.0:
            phi, degree = (lambda x: np.zeros_like(np.asarray(x, dtype=float))), 0
        else:
            phi, degree = _quadratic_phi(c), 2
        return _power_model(name, m, m - 1.0, 1.0, 1.0, phi, degree, c == 0.0, params, bc)

    if name == "porous_medium_convection":
        _require(params, "m")
        m = float(params["m"])
        if m <= 1:
            raise ModelError(f"porous medium exponent must exceed 1, got m={m}")

        def phi(x):
            return np.asarray(x, dtype=float).copy()

        return _power_model(name, 1.0, 1.0, m / (m - 1.0), m - 1.0, phi, 1, False, params, bc)

    if name == "double_well":
        _require(params, "nu", "m")
        nu, m = float(params["nu"]), float(params["m"])
        if m <= 1:
            raise ModelError(f"double-well exponent must exceed 1, got m={m}")
        if "phi_quadratic" in params:
            phi, degree = _quadratic_phi(float(params["phi_quadratic"])), 2
        else:

            def phi(x):
                x = np.asarray(x, dtype=float)
                return 0.25 * x**4 - 0.5 * x**2

            degree = 4
        return _power_model(name, 1.0, 1.0, nu, m - 1.0, phi, degree, False, params, bc)

    if name == "general_fp":
        _require(params, "N")
        n = float(params["N"])
        if n <= 0:
            raise ModelError(f"general_fp needs N > 0, got N={n}")
        return _fp_model(name, 1.0, n, params, bc)

    if name == "boson_fermion":
        _require(params, "k_sign")
        kappa = float(params["k_sign"])
        if kappa not in (1.0, -1.0):
            raise ModelError(f"k_sign must be +1 (boson) or -1 (fermion), got {kappa}")
        return _fp_model(name, kappa, 1.0, params, bc)

    if name == "custom":
        needed = ("f", "h_entropy", "h_prime", "h_double_prime", "phi")
        missing = [k for k in needed if k not in callables]
        if missing:
            raise ModelError(f"custom model needs callables: {', '.join(missing)}")
        return ModelSpec(
            name=str(params.get("label", "custom")) if params else "custom",
            bc=bc,
            params=params,
            trivial_potential_quadratic_H=bool(params.get("trivial_potential", False)),
            **{k: callables[k] for k in needed},
        )

    raise ModelError(f"unknown model {name!r}; expected one of {', '.join(MODEL_NAMES)}")


def barenblatt(m: float, x, t: float):
    """Barenblatt profile of u_t = (u^m)_xx with the constant 0.2.

    B_m(x, t) = max(0, t^-a (0.2 - a(m-1)/(2m) x^2 t^-2a)^(1/(m-1))), a = 1/(m+1).
    """
    if m <= 1:
        raise ValueError(f"Barenblatt profile needs m > 1, got {m}")
    if t <= 0:
        raise ValueError(f"Barenblatt profile needs t > 0, got {t}")
    alpha = 1.0 / (m + 1.0)
    x = np.asarray(x, dtype=float)
    core = 0.2 - alpha * (m - 1.0) / (2.0 * m) * x**2 * t ** (-2.0 * alpha)
    return t ** (-alpha) * np.maximum(core, 0.0) ** (1.0 / (m - 1.0))


def barenblatt_support(m: float, t: float) -> float:
    """Half-width of the Barenblatt support at time t."""
    alpha = 1.0 / (m + 1.0)
    return float(np.sqrt(0.2 * 2.0 * m / (alpha * (m - 1.0)) * t ** (2.0 * alpha)))
