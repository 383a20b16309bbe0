"""Entropy-satisfying discontinuous Galerkin solver for 1D nonlinear
Fokker-Planck equations u_t = (f(u) (Phi + H'(u))_x)_x.

The hot loops run in a compiled Cython core when it is built and in NumPy
otherwise; ``esdg.BACKEND`` tells which one was picked at import.
"""
from ._kernels import BACKEND, HAVE_COMPILED
from .config import ConfigError, RunConfig, load_config
from .dg_operator import (
    DGOperator,
    FluxParams,
    alpha_coefficients,
    cell_average_update_weights,
    cfl_entropy,
    cfl_positivity,
    gamma_bound,
    semi_discrete_rhs,
    stable_mesh_ratio,
)
from .diagnostics import (
    RunReport,
    convergence_orders,
    entropy,
    entropy_norm_q,
    interface_jumps,
    l1_error,
    mass,
)
from .limiter import LimiterConfig, LimiterFailure, reconstruct_positive
from .mesh_basis import Basis, Mesh, build_mesh, gauss_quadrature, legendre_eval
from .models import BoundaryCondition, ModelError, ModelSpec, barenblatt, make_model
from .projector import DGField, EvaluationDomainError, compute_q, project_l2
from .reference import reference_solution
from .time_integration import SolverFailure, TimeController, run, step_euler, step_heun

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "HAVE_COMPILED",
    "Basis",
    "BoundaryCondition",
    "ConfigError",
    "DGField",
    "DGOperator",
    "EvaluationDomainError",
    "FluxParams",
    "LimiterConfig",
    "LimiterFailure",
    "Mesh",
    "ModelError",
    "ModelSpec",
    "RunConfig",
    "RunReport",
    "SolverFailure",
    "TimeController",
    "alpha_coefficients",
    "barenblatt",
    "build_mesh",
    "cell_average_update_weights",
    "cfl_entropy",
    "cfl_positivity",
    "compute_q",
    "convergence_orders",
    "entropy",
    "entropy_norm_q",
    "gamma_bound",
    "gauss_quadrature",
    "interface_jumps",
    "l1_error",
    "legendre_eval",
    "load_config",
    "make_model",
    "mass",
    "project_l2",
    "reconstruct_positive",
    "reference_solution",
    "run",
    "semi_discrete_rhs",
    "stable_mesh_ratio",
    "step_euler",
    "step_heun",
]
