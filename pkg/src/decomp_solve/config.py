"""Run configuration, canonical JSON encoding and the report schema.

Configs and reports are JSON. Floats are written with 17 significant digits
so that parse -> serialize is byte-stable; window keys are sorted numerically.
"""
from __future__ import annotations

import hashlib
import json
import math
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import measures as ms
from .errors import InputError
from .process import DecayMixtureFamily, NoiseProcess, PushforwardPower, Stationary, ZeroTail
from .solver import SolverOptions
from .spectral import LinearMap

__all__ = [
    "REPORT_SCHEMA",
    "RunConfig",
    "RunOptions",
    "RunReport",
    "parse_config",
    "load_config",
    "dumps_canonical",
    "config_hash",
    "model_spec",
    "config_schema",
    "report_schema",
]

REPORT_SCHEMA = "decomp-solve.report/1"

Matrix = list[list[float]]
Vector = list[float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class DiracSpec(_Strict):
    tag: Literal["Dirac"]
    point: Vector


class GaussianSpec(_Strict):
    tag: Literal["Gaussian"]
    mean: Vector
    cov: Matrix


class UniformBoxSpec(_Strict):
    tag: Literal["UniformBox"]
    lo: Vector
    hi: Vector


class MixtureSpec(_Strict):
    tag: Literal["Mixture"]
    weights: Vector
    components: list["ModelSpec"]


class ShiftedSpec(_Strict):
    tag: Literal["Shifted"]
    base: "ModelSpec"
    offset: Vector


class PushforwardSpec(_Strict):
    tag: Literal["Pushforward"]
    map: Matrix
    base: "ModelSpec"


class SampleCloudSpec(_Strict):
    tag: Literal["SampleCloud"]
    points: Matrix


class ConvolutionSpec(_Strict):
    tag: Literal["Convolution"]
    parts: list["ModelSpec"]


class ReflectedSpec(_Strict):
    tag: Literal["Reflected"]
    base: "ModelSpec"


ModelSpec = Annotated[
    Union[
        DiracSpec,
        GaussianSpec,
        UniformBoxSpec,
        MixtureSpec,
        ShiftedSpec,
        PushforwardSpec,
        SampleCloudSpec,
        ConvolutionSpec,
        ReflectedSpec,
    ],
    Field(discriminator="tag"),
]

for _cls in (MixtureSpec, ShiftedSpec, PushforwardSpec, ConvolutionSpec, ReflectedSpec):
    _cls.model_rebuild()


class StationarySpec(_Strict):
    tag: Literal["Stationary"]
    model: ModelSpec


class PushforwardPowerSpec(_Strict):
    tag: Literal["PushforwardPower"]
    base: ModelSpec
    map: Matrix


class DecayMixtureFamilySpec(_Strict):
    tag: Literal["DecayMixtureFamily"]
    a: float


class ZeroTailSpec(_Strict):
    tag: Literal["ZeroTail"] = "ZeroTail"


TailSpec = Annotated[
    Union[StationarySpec, PushforwardPowerSpec, DecayMixtureFamilySpec, ZeroTailSpec],
    Field(discriminator="tag"),
]


class ProcessSpec(_Strict):
    window: dict[int, ModelSpec] = Field(default_factory=dict)
    tail_rule: TailSpec = Field(default_factory=ZeroTailSpec)


class RunOptions(_Strict):
    k_min: int = -10
    k_max: int = 10
    horizon: int = Field(1000, ge=1)
    tol: float = Field(1e-8, gt=0)
    seed: int = Field(0, ge=0, lt=2**64)
    samples: int = Field(10_000, ge=1)
    p: float = Field(2.0, ge=1)
    force: bool = False
    shift_v: Optional[Vector] = None
    permutations: int = Field(500, ge=200)
    alpha: float = Field(0.01, gt=0, lt=1)
    n_truncation: Optional[int] = Field(None, ge=0)
    k_start: Optional[int] = None
    k_end: Optional[int] = None
    n_paths: int = Field(1000, ge=1)
    initial: Optional[ModelSpec] = None

    @model_validator(mode="after")
    def _bounds(self):
        if self.k_min > self.k_max:
            raise ValueError("k_min must not exceed k_max")
        return self


class RunConfig(_Strict):
    dim: int = Field(ge=1)
    map: Matrix
    process: ProcessSpec
    options: RunOptions = Field(default_factory=RunOptions)

    @field_validator("map")
    @classmethod
    def _square(cls, v):
        if not v or any(len(r) != len(v) for r in v):
            raise ValueError("map must be a square matrix literal")
        return v

    @model_validator(mode="after")
    def _dims(self):
        if len(self.map) != self.dim:
            raise ValueError(f"map is {len(self.map)}x{len(self.map[0])} but dim is {self.dim}")
        if self.options.shift_v is not None and len(self.options.shift_v) != self.dim:
            raise ValueError("shift_v length must equal dim")
        try:
            self.to_process()
            if self.options.initial is not None:
                _build(self.options.initial)
        except (InputError, ValueError) as exc:
            raise ValueError(str(exc)) from None
        return self

    # ---- domain objects

    def to_map(self) -> LinearMap:
        return LinearMap(np.asarray(self.map, dtype=float))

    def to_process(self) -> NoiseProcess:
        window = {k: _build(v) for k, v in self.process.window.items()}
        return NoiseProcess(self.dim, window, _build_tail(self.process.tail_rule, self.dim))

    def solver_options(self) -> SolverOptions:
        o = self.options
        return SolverOptions(
            tol=o.tol,
            horizon=o.horizon,
            p=o.p,
            samples=o.samples,
            seed=o.seed,
            permutations=o.permutations,
            alpha=o.alpha,
            n_truncation=o.n_truncation,
            force=o.force,
        )

    def initial_model(self) -> Optional[ms.NoiseModel]:
        return None if self.options.initial is None else _build(self.options.initial)

    def canonical(self) -> str:
        return dumps_canonical(self.model_dump(mode="python"))


def _build(spec) -> ms.NoiseModel:
    return ms.from_dict(spec.model_dump(mode="python"))


def model_spec(model: ms.NoiseModel):
    """Config entry for a noise model (inverse of the config -> model builder)."""
    from pydantic import TypeAdapter

    return TypeAdapter(ModelSpec).validate_python(ms.to_dict(model))


def _build_tail(spec, dim: int):
    if isinstance(spec, StationarySpec):
        return Stationary(_build(spec.model))
    if isinstance(spec, PushforwardPowerSpec):
        return PushforwardPower(_build(spec.base), LinearMap(np.asarray(spec.map, dtype=float)))
    if isinstance(spec, DecayMixtureFamilySpec):
        return DecayMixtureFamily(spec.a)
    return ZeroTail()


# --------------------------------------------------------------------------
# canonical JSON


def _num(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == 0.0 and math.copysign(1.0, x) < 0:
        return "-0.0"  # "-0" would parse back as the integer 0
    return format(x, ".17g")


def _encode(obj: Any, level: int, out: list) -> None:
    pad = "  " * (level + 1)
    if isinstance(obj, BaseModel):
        obj = obj.model_dump(mode="python")
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_num(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, np.ndarray):
        _encode(obj.tolist(), level, out)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        keys = list(obj)
        if all(isinstance(k, (int, np.integer)) for k in keys):
            keys = sorted(keys)
        out.append("{\n")
        for i, k in enumerate(keys):
            out.append(pad + json.dumps(str(k)) + ": ")
            _encode(obj[k], level + 1, out)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append("  " * level + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            out.append("[")
            for i, v in enumerate(obj):
                _encode(v, level, out)
                if i < len(obj) - 1:
                    out.append(", ")
            out.append("]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _encode(v, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append("  " * level + "]")
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps_canonical(obj: Any) -> str:
    """Indented JSON with 17-digit floats, numeric key order for int-keyed dicts."""
    out: list = []
    _encode(obj, 0, out)
    out.append("\n")
    return "".join(out)


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(cfg.canonical().encode()).hexdigest()


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for e in exc.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"field {loc}: {e['msg']}")
    return "; ".join(lines)


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise InputError("invalid config: " + _format_validation(exc)) from None


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


# --------------------------------------------------------------------------
# reports


class RunReport(_Strict):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=True)

    schema_tag: Literal["decomp-solve.report/1"] = REPORT_SCHEMA
    command: Literal["analyze", "solve", "verify", "simulate"]
    exit_code: int
    message: str = ""
    config: dict
    config_hash: str
    seed: int
    wall_clock_s: float
    existence: Optional[dict] = None
    solution: Optional[dict] = None
    verification: Optional[dict] = None
    decay: Optional[dict] = None
    simulation: Optional[dict] = None

    def dumps(self) -> str:
        return dumps_canonical(self.model_dump(mode="python"))


def config_schema() -> dict:
    return RunConfig.model_json_schema()


def report_schema() -> dict:
    return RunReport.model_json_schema()
