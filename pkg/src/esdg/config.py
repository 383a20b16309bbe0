"""Run configuration: a JSON object model with strict validation.

Every section is a frozen dataclass.  ``RunConfig.from_dict`` rejects unknown
keys and wrong types with the dotted path of the offending field, and
``to_dict`` returns a plain structure that round-trips through JSON.
"""
from __future__ import annotations

import dataclasses
import json
import math
import typing
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .dg_operator import FRAMES, FluxParams
from .limiter import FALLBACKS, LimiterConfig
from .models import MODEL_NAMES, ModelSpec, make_model
from .time_integration import POLICIES, TimeController


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path or '<root>'}: {message}")


@dataclass(frozen=True)
class ModelConfig:
    name: str = "porous_medium"
    params: dict = field(default_factory=lambda: {"m": 2.0})

    def validate(self, path):
        if self.name not in MODEL_NAMES or self.name == "custom":
            raise ConfigError(f"{path}.name", f"unknown model {self.name!r}")
        for key, value in self.params.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{path}.params.{key}", "model parameters must be numbers")


@dataclass(frozen=True)
class FluxConfig:
    beta0: float = 4.0
    beta1: float = 1.0 / 12.0
    second_jump_frame: str = "physical"

    def validate(self, path):
        if self.second_jump_frame not in FRAMES:
            raise ConfigError(f"{path}.second_jump_frame", f"must be one of {FRAMES}")
        if not self.beta0 > 0:
            raise ConfigError(f"{path}.beta0", "must be positive")

    def build(self) -> FluxParams:
        return FluxParams(self.beta0, self.beta1, self.second_jump_frame)


@dataclass(frozen=True)
class TimeConfig:
    t_end: float = 1.0
    policy: str = "fixed_ck"
    c_of_k: float = 0.1
    dt: Optional[float] = None
    cfl: float = 0.1
    dt_max: Optional[float] = None
    safety: float = 1.0
    freeze_fmax: bool = False
    scheme: str = "heun"

    def validate(self, path):
        if self.policy not in POLICIES:
            raise ConfigError(f"{path}.policy", f"must be one of {POLICIES}")
        if self.scheme not in ("heun", "euler"):
            raise ConfigError(f"{path}.scheme", "must be 'heun' or 'euler'")
        if not self.t_end >= 0:
            raise ConfigError(f"{path}.t_end", "must be non-negative")
        if self.policy == "explicit_dt" and not (self.dt and self.dt > 0):
            raise ConfigError(f"{path}.dt", "explicit_dt policy needs dt > 0")
        if not self.c_of_k > 0:
            raise ConfigError(f"{path}.c_of_k", "must be positive")

    def build(self, t_end: Optional[float] = None, c_of_k: Optional[float] = None) -> TimeController:
        return TimeController(
            t_end=self.t_end if t_end is None else t_end,
            policy=self.policy,
            c_of_k=self.c_of_k if c_of_k is None else c_of_k,
            dt=self.dt,
            safety=self.safety,
            freeze_fmax=self.freeze_fmax,
            cfl=self.cfl,
            dt_max=math.inf if self.dt_max is None else self.dt_max,
        )


@dataclass(frozen=True)
class LimiterSection:
    enabled: bool = False
    delta: float = 0.0
    skip_zero_cells: bool = False
    fallback: str = "error"
    limit_initial: bool = False

    def validate(self, path):
        if self.fallback not in FALLBACKS:
            raise ConfigError(f"{path}.fallback", f"must be one of {sorted(FALLBACKS)}")
        if self.delta < 0:
            raise ConfigError(f"{path}.delta", "must be non-negative")

    def build(self) -> LimiterConfig:
        return LimiterConfig(
            delta=self.delta,
            enabled=self.enabled,
            skip_zero_cells=self.skip_zero_cells,
            fallback=self.fallback,
        )


@dataclass(frozen=True)
class InitialConfig:
    """Named initial profile with parameters, or a NumPy expression in x."""

    kind: str = "preset"
    name: str = "sine"
    params: dict = field(default_factory=dict)
    expression: Optional[str] = None

    def validate(self, path):
        from .presets import INITIAL_PROFILES

        if self.kind == "preset":
            if self.name not in INITIAL_PROFILES:
                raise ConfigError(f"{path}.name", f"unknown initial profile {self.name!r}")
        elif self.kind == "expression":
            if not self.expression:
                raise ConfigError(f"{path}.expression", "expression initial data needs an expression")
            try:
                compile(self.expression, "<initial>", "eval")
            except SyntaxError as exc:
                raise ConfigError(f"{path}.expression", f"invalid expression: {exc.msg}") from exc
        else:
            raise ConfigError(f"{path}.kind", "must be 'preset' or 'expression'")

    def build(self):
        from .presets import INITIAL_PROFILES, expression_profile

        if self.kind == "expression":
            return expression_profile(self.expression)
        return INITIAL_PROFILES[self.name](**self.params)


@dataclass(frozen=True)
class OutputConfig:
    snapshot_times: tuple = ()
    record_every: int = 1
    samples_per_cell: int = 5

    def validate(self, path):
        if self.record_every < 1:
            raise ConfigError(f"{path}.record_every", "must be >= 1")
        if self.samples_per_cell < 1:
            raise ConfigError(f"{path}.samples_per_cell", "must be >= 1")


@dataclass(frozen=True)
class StopConfig:
    on_negative_average: bool = False
    max_avg_factor: Optional[float] = None


@dataclass(frozen=True)
class LadderConfig:
    degree: int = 1
    flux: FluxConfig = field(default_factory=FluxConfig)
    c_of_k: float = 0.1
    h: tuple = (0.4, 0.2, 0.1, 0.05)
    limiter: Optional[LimiterSection] = None

    def validate(self, path):
        self.flux.validate(f"{path}.flux")
        if self.limiter is not None:
            self.limiter.validate(f"{path}.limiter")
        if not 0 <= self.degree <= 3:
            raise ConfigError(f"{path}.degree", "must be between 0 and 3")
        if len(self.h) < 3:
            raise ConfigError(f"{path}.h", "a ladder needs at least 3 mesh sizes")
        if any(b >= a for a, b in zip(self.h, self.h[1:])):
            raise ConfigError(f"{path}.h", "mesh sizes must be strictly decreasing")


@dataclass(frozen=True)
class ReferenceConfig:
    integrator: str = "implicit"
    degree: int = 3
    refine: int = 4
    flux: FluxConfig = field(default_factory=lambda: FluxConfig(9.0, 0.25))
    c_of_k: Optional[float] = None
    limiter: Optional[LimiterSection] = None

    def validate(self, path):
        if self.integrator not in ("implicit", "explicit"):
            raise ConfigError(f"{path}.integrator", "must be 'implicit' or 'explicit'")
        if self.integrator == "explicit" and not (self.c_of_k and self.c_of_k > 0):
            raise ConfigError(f"{path}.c_of_k", "explicit reference needs c_of_k > 0")
        self.flux.validate(f"{path}.flux")


@dataclass(frozen=True)
class ConvergenceConfig:
    """Error ladders; ``t_end`` overrides ``time.t_end`` for these solves."""

    ladders: tuple[LadderConfig, ...] = ()
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    t_end: Optional[float] = None


@dataclass(frozen=True)
class SweepConfig:
    beta_pairs: tuple = ()


@dataclass(frozen=True)
class DegreeConfig:
    degree: int = 2
    flux: FluxConfig = field(default_factory=FluxConfig)
    c_of_k: float = 0.1


@dataclass(frozen=True)
class BarenblattConfig:
    """Front-capturing study against the exact Barenblatt profile.

    ``final_time`` is the figure time.  With ``time_meaning`` "absolute" it is
    the Barenblatt time, so the solver runs for final_time - t0; with "solver"
    the solver runs for final_time and is compared with B(t0 + final_time).
    """

    m: float = 2.0
    t0: float = 0.1
    final_time: float = 0.5
    time_meaning: str = "absolute"
    h_values: tuple = ()
    compare_degrees: tuple[DegreeConfig, ...] = ()

    @property
    def solver_time(self) -> float:
        return self.final_time - self.t0 if self.time_meaning == "absolute" else self.final_time

    @property
    def exact_time(self) -> float:
        return self.t0 + self.solver_time

    def validate(self, path):
        if self.time_meaning not in ("absolute", "solver"):
            raise ConfigError(f"{path}.time_meaning", "must be 'absolute' or 'solver'")


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    preset: Optional[str] = None
    model: ModelConfig = field(default_factory=ModelConfig)
    domain: tuple = (-1.0, 1.0)
    n_cells: int = 20
    degree: int = 2
    flux: FluxConfig = field(default_factory=FluxConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    limiter: LimiterSection = field(default_factory=LimiterSection)
    initial: InitialConfig = field(default_factory=InitialConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    stop: StopConfig = field(default_factory=StopConfig)
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    barenblatt: BarenblattConfig = field(default_factory=BarenblattConfig)
    seed: int = 0

    def validate(self) -> "RunConfig":
        self.model.validate("model")
        self.flux.validate("flux")
        self.time.validate("time")
        self.limiter.validate("limiter")
        self.initial.validate("initial")
        self.outputs.validate("outputs")
        self.barenblatt.validate("barenblatt")
        for i, ladder in enumerate(self.convergence.ladders):
            ladder.validate(f"convergence.ladders[{i}]")
        self.convergence.reference.validate("convergence.reference")
        for i, pair in enumerate(self.sweep.beta_pairs):
            if len(pair) != 2:
                raise ConfigError(f"sweep.beta_pairs[{i}]", "expected [beta0, beta1]")
        a, b = self.domain
        if not b > a:
            raise ConfigError("domain", "need a < b")
        if self.n_cells < 2:
            raise ConfigError("n_cells", "need at least 2 cells")
        if not 0 <= self.degree <= 3:
            raise ConfigError("degree", "must be between 0 and 3")
        return self

    # construction helpers

    def build_model(self) -> ModelSpec:
        return make_model(self.model.name, self.model.params)

    def to_dict(self) -> dict:
        return _to_plain(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        from .presets import expand_preset

        if not isinstance(data, dict):
            raise ConfigError("", "configuration must be a JSON object")
        data = expand_preset(data)
        return _from_plain(cls, data, "").validate()

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (tuple, list)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _from_plain(tp, value, path):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _from_plain(args[0], value, path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected an object, got {type(value).__name__}")
        hints = typing.get_type_hints(tp)
        names = {f.name for f in dataclasses.fields(tp)}
        unknown = sorted(set(value) - names)
        if unknown:
            raise ConfigError(_join(path, unknown[0]), "unknown field")
        kwargs = {k: _from_plain(hints[k], v, _join(path, k)) for k, v in value.items()}
        return tp(**kwargs)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        item = typing.get_args(tp)[0]
        return tuple(_from_plain(item, v, f"{path}[{i}]") for i, v in enumerate(value))
    if tp is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        return tuple(_freeze(v) for v in value)
    if tp is dict:
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected an object, got {type(value).__name__}")
        return dict(value)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if tp is Any:
        return value
    raise ConfigError(path, f"unsupported field type {tp!r}")


def _freeze(v):
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    if isinstance(v, dict):
        return {k: _freeze(x) for k, x in v.items()}
    return v


def _join(path, key):
    return f"{path}.{key}" if path else key


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.sub=value`` overrides to a plain config dict.

    Values are parsed as JSON when possible (numbers, booleans, lists) and
    kept as strings otherwise.  List entries are addressed by index, either
    as ``ladders.0.h`` or ``ladders[0].h``.
    """
    import copy
    import re

    data = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, raw = item.split("=", 1)
        parts = re.sub(r"\[(\d+)\]", r".\1", key.strip()).split(".")
        node = data
        for i, part in enumerate(parts[:-1]):
            sub = _child(node, part, ".".join(parts[: i + 1]))
            if sub is None:
                sub = {}
                _set(node, part, sub, key)
            node = sub
        _set(node, parts[-1], _parse_scalar(raw.strip()), key)
    return data


def _child(node, part, path):
    if isinstance(node, list):
        try:
            return node[int(part)]
        except (ValueError, IndexError) as exc:
            raise ConfigError(path, "bad list index") from exc
    if not isinstance(node, dict):
        raise ConfigError(path, "cannot descend into a scalar")
    return node.get(part)


def _set(node, part, value, path):
    if isinstance(node, list):
        try:
            node[int(part)] = value
        except (ValueError, IndexError) as exc:
            raise ConfigError(path, "bad list index") from exc
    elif isinstance(node, dict):
        node[part] = value
    else:
        raise ConfigError(path, "cannot assign into a scalar")


def load_config(path: Optional[str] = None, preset: Optional[str] = None, overrides=()) -> RunConfig:
    """Read a JSON file and/or a preset name, apply overrides, validate."""
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError("", f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON in {path}: {exc}") from exc
    else:
        data = {}
    if preset:
        data = {**data, "preset": preset}
    from .presets import expand_preset

    data = expand_preset(data)
    return RunConfig.from_dict(apply_overrides(data, overrides))
