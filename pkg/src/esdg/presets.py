"""Named initial profiles and the frozen experiment presets.

Each preset is a complete plain config.  A config dict with a ``preset`` key
is expanded by deep-merging its own entries over the preset, so a run file
only needs to state what differs.  Step constants are frozen here (7
significant digits) so tables are reproducible.
"""
from __future__ import annotations

import copy
from typing import Callable

import numpy as np

from .models import barenblatt


def sine(mean: float = 0.5, amplitude: float = 0.5) -> Callable:
    def u0(x):
        return mean + amplitude * np.sin(np.pi * np.asarray(x, dtype=float))

    return u0


def bump(eps: float = 1e-5, height: float = 30.0, width: float = 25.0) -> Callable:
    def u0(x):
        x = np.asarray(x, dtype=float)
        return eps * (1.0 + height * np.exp(-width * x * x))

    return u0


def gaussian(mass: float = 0.1, variance: float = 0.2, center: float = 0.0) -> Callable:
    def u0(x):
        x = np.asarray(x, dtype=float) - center
        return mass / np.sqrt(2.0 * np.pi * variance) * np.exp(-x * x / (2.0 * variance))

    return u0


def double_gaussian(mass: float = 1.0, center: float = 2.0) -> Callable:
    def u0(x):
        x = np.asarray(x, dtype=float)
        return mass / (2.0 * np.sqrt(2.0 * np.pi)) * (
            np.exp(-((x - center) ** 2) / 2.0) + np.exp(-((x + center) ** 2) / 2.0)
        )

    return u0


def barenblatt_profile(m: float = 2.0, t0: float = 0.1) -> Callable:
    def u0(x):
        return barenblatt(m, x, t0)

    return u0


INITIAL_PROFILES = {
    "sine": sine,
    "bump": bump,
    "gaussian": gaussian,
    "double_gaussian": double_gaussian,
    "barenblatt": barenblatt_profile,
}

_EXPR_NAMES = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "maximum", "minimum", "where")
}
_EXPR_NAMES["pi"] = np.pi


def expression_profile(expression: str) -> Callable:
    """Initial data from a NumPy expression in ``x`` (builtins disabled)."""
    code = compile(expression, "<initial>", "eval")

    def u0(x):
        x = np.asarray(x, dtype=float)
        value = eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, "x": x})
        return np.broadcast_to(np.asarray(value, dtype=float), x.shape).copy()

    return u0


def _flux(beta0, beta1=0.0, frame="physical"):
    return {"beta0": beta0, "beta1": beta1, "second_jump_frame": frame}


def _limiter(enabled=True, delta=0.0, skip_zero_cells=False, fallback="error", limit_initial=False):
    return {
        "enabled": enabled,
        "delta": delta,
        "skip_zero_cells": skip_zero_cells,
        "fallback": fallback,
        "limit_initial": limit_initial,
    }


def _ladder(degree, flux, c_of_k, h, limiter=None):
    return {"degree": degree, "flux": flux, "c_of_k": c_of_k, "h": list(h), "limiter": limiter}


_STD_FLUX = {1: _flux(1.0, 0.0), 2: _flux(4.0, 1.0 / 12.0), 3: _flux(9.0, 0.25)}
_HALVING = [0.4, 0.2, 0.1, 0.05]

# Porous medium m = 2, Barenblatt data, fronts.
_EXAMPLE1 = {
    "name": "example1",
    "model": {"name": "porous_medium", "params": {"m": 2.0}},
    "domain": [-2.0, 2.0],
    "n_cells": 80,
    "degree": 2,
    "flux": _STD_FLUX[2],
    # stable Heun ratio for the largest mobility 2 max B_2(., 0.1)
    "time": {"t_end": 0.4, "policy": "fixed_ck", "c_of_k": 0.03094393},
    "limiter": _limiter(delta=0.0, skip_zero_cells=True, fallback="flatten", limit_initial=True),
    "initial": {"kind": "preset", "name": "barenblatt", "params": {"m": 2.0, "t0": 0.1}},
    "outputs": {"snapshot_times": [0.4], "record_every": 1},
    "barenblatt": {
        "m": 2.0,
        "t0": 0.1,
        "final_time": 0.5,
        "time_meaning": "absolute",
        "h_values": [0.1, 0.05, 0.025],
        # stable Heun ratios for the largest mobility, per degree
        "compare_degrees": [
            {"degree": 1, "flux": _STD_FLUX[1], "c_of_k": 0.1547196},
            {"degree": 2, "flux": _STD_FLUX[2], "c_of_k": 0.03094393},
            {"degree": 3, "flux": _STD_FLUX[3], "c_of_k": 0.003421383},
        ],
    },
}

# Trivial potential, small positive data, and the beta1 sweep built on it.
_EXAMPLE2 = {
    "name": "example2",
    "model": {"name": "porous_medium", "params": {"m": 2.0}},
    "domain": [-1.0, 1.0],
    "n_cells": 10,
    "degree": 2,
    "flux": _flux(2.0, 1.0 / 6.0),
    "time": {"t_end": 1000.0, "policy": "explicit_dt", "dt": 0.01},
    "limiter": _limiter(delta=1e-10, fallback="flatten"),
    "initial": {"kind": "preset", "name": "bump", "params": {"eps": 1e-5}},
    "outputs": {"record_every": 100},
}

_TABLE1 = copy.deepcopy(_EXAMPLE2)
_TABLE1.update(
    name="table1",
    model={"name": "porous_medium", "params": {"m": 2.0, "phi_quadratic": 30e-5}},
    sweep={
        "beta_pairs": [
            [2.0, b1] for b1 in (0.0, 1.0 / 12.0, 1.0 / 6.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0, 2.0, 3.0)
        ]
    },
    outputs={"record_every": 1000},
)

_TABLE1_TRIVIAL = copy.deepcopy(_EXAMPLE2)
_TABLE1_TRIVIAL.update(
    name="table1_trivial",
    sweep={"beta_pairs": [[2.0, 0.0], [2.0, 1.0 / 6.0], [2.0, 0.5]]},
    outputs={"record_every": 1000},
)

# Examples 3 and 4: porous medium with convection, t = 1 error tables.
_EXAMPLE3 = {
    "name": "example3",
    "model": {"name": "porous_medium_convection", "params": {"m": 2.0}},
    "domain": [-1.0, 1.0],
    "n_cells": 20,
    "degree": 2,
    "flux": _STD_FLUX[2],
    "time": {"t_end": 1.0, "policy": "fixed_ck", "c_of_k": 0.01333333},
    "limiter": _limiter(delta=0.0),
    "initial": {"kind": "preset", "name": "sine", "params": {"mean": 0.5, "amplitude": 0.5}},
    "outputs": {"record_every": 10},
    "convergence": {
        # c_of_k: stable Heun ratio for f H'' <= 2
        "ladders": [
            _ladder(1, _STD_FLUX[1], 0.06666667, _HALVING),
            _ladder(2, _STD_FLUX[2], 0.01333333, _HALVING),
            _ladder(3, _STD_FLUX[3], 0.001474229, _HALVING),
        ],
        "reference": {"integrator": "implicit", "degree": 3, "refine": 4, "flux": _STD_FLUX[3]},
    },
}

_EXAMPLE4 = copy.deepcopy(_EXAMPLE3)
_EXAMPLE4.update(
    name="example4",
    model={"name": "porous_medium_convection", "params": {"m": 3.0}},
    time={"t_end": 1.0, "policy": "fixed_ck", "c_of_k": 0.003950617},
    limiter=_limiter(enabled=False),
    initial={"kind": "preset", "name": "sine", "params": {"mean": 1.0, "amplitude": 0.5}},
    convergence={
        # c_of_k: stable Heun ratio for f H'' <= 3 * 1.5^2
        "ladders": [
            _ladder(1, _STD_FLUX[1], 0.01975309, _HALVING),
            _ladder(2, _STD_FLUX[2], 0.003950617, _HALVING),
            _ladder(3, _STD_FLUX[3], 0.0004368086, _HALVING),
        ],
        "reference": {"integrator": "implicit", "degree": 3, "refine": 4, "flux": _STD_FLUX[3]},
    },
)

# Double-well potential, free energy decay and error table.
_DW_FLUX3 = _flux(12.0, 1.0 / 24.0)
_EXAMPLE5 = {
    "name": "example5",
    "model": {"name": "double_well", "params": {"nu": 1.0, "m": 2.0}},
    "domain": [-2.0, 2.0],
    "n_cells": 40,
    "degree": 2,
    "flux": _STD_FLUX[2],
    "time": {"t_end": 40.0, "policy": "fixed_ck", "c_of_k": 0.05},
    "limiter": _limiter(delta=0.0, skip_zero_cells=True, fallback="flatten", limit_initial=True),
    "initial": {"kind": "preset", "name": "gaussian", "params": {"mass": 0.1, "variance": 0.2}},
    "outputs": {"snapshot_times": [0.0, 1.0, 5.0, 10.0, 40.0], "record_every": 100},
    "convergence": {
        "t_end": 1.0,
        # step ratios capped by the drift |Phi'| <= 6 on coarse meshes
        "ladders": [
            _ladder(1, _STD_FLUX[1], 0.1, _HALVING, _limiter(enabled=False)),
            _ladder(2, _STD_FLUX[2], 0.05, _HALVING, _limiter(enabled=False)),
            _ladder(3, _DW_FLUX3, 0.02, [0.8, 0.4, 0.2, 0.1], _limiter(enabled=False)),
        ],
        "reference": {
            "integrator": "explicit",
            "degree": 3,
            "refine": 4,
            "flux": _DW_FLUX3,
            "c_of_k": 0.0327357,
            "limiter": _limiter(delta=0.0, fallback="flatten"),
        },
    },
}

# Boson-type Fokker-Planck model, sub- and super-critical mass.
_EXAMPLE6_M1 = {
    "name": "example6_m1",
    "model": {"name": "general_fp", "params": {"N": 3.0}},
    "domain": [-6.0, 6.0],
    "n_cells": 60,
    "degree": 2,
    "flux": _flux(12.0, 1.0 / 12.0),
    "time": {"t_end": 10.0, "policy": "fixed_ck", "c_of_k": 0.00674032},
    "limiter": _limiter(delta=1e-10, limit_initial=True),
    "initial": {"kind": "preset", "name": "double_gaussian", "params": {"mass": 1.0}},
    "outputs": {"snapshot_times": [5.0, 10.0], "record_every": 100},
}

_EXAMPLE6_M10 = copy.deepcopy(_EXAMPLE6_M1)
_EXAMPLE6_M10.update(
    name="example6_m10",
    # drift speed grows with the concentration, so the step follows it
    time={"t_end": 1.0, "policy": "adaptive", "c_of_k": 0.00168508, "cfl": 0.025},
    initial={"kind": "preset", "name": "double_gaussian", "params": {"mass": 10.0}},
    outputs={"snapshot_times": [0.1, 0.2, 0.3], "record_every": 100},
    stop={"max_avg_factor": 5.25},
)

PRESETS = {
    "example1": _EXAMPLE1,
    "example2": _EXAMPLE2,
    "table1": _TABLE1,
    "table1_trivial": _TABLE1_TRIVIAL,
    "example3": _EXAMPLE3,
    "example4": _EXAMPLE4,
    "example5": _EXAMPLE5,
    "example6_m1": _EXAMPLE6_M1,
    "example6_m10": _EXAMPLE6_M10,
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def expand_preset(data: dict) -> dict:
    """Deep-merge ``data`` over the preset it names; no-op without a preset."""
    from .config import ConfigError

    name = data.get("preset")
    if name is None:
        return copy.deepcopy(data)
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    return _merge({**PRESETS[name], "preset": name}, data)


def preset_config(name: str, **overrides):
    """Validated :class:`RunConfig` for a preset with top-level overrides."""
    from .config import RunConfig

    return RunConfig.from_dict({"preset": name, **overrides})
