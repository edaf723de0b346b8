"""Experiment configuration: a single validated JSON document drives every
runner entry point.

Unknown fields are rejected everywhere so a typo cannot silently disable a
check, and validation happens before any path is generated.
"""

from __future__ import annotations

import json
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .noise import NoiseSpec, PiecewiseRate

__all__ = [
    "CHECK_NAMES",
    "ConfigError",
    "EnsembleModel",
    "ExperimentConfig",
    "GridModel",
    "IntegrandModel",
    "NoiseModel",
    "PartitionsModel",
    "ThresholdsModel",
    "apply_overrides",
    "load_config",
    "parse_config",
    "reference_config_path",
]

# Registry order is the execution and report order; checks.py asserts its
# runner table matches this list exactly.
CHECK_NAMES = (
    "linearity",
    "stopping",
    "continuous_part",
    "jump_formula",
    "f0_scaling",
    "oracle_equivalence",
    "riemann_convergence",
    "associativity",
    "good_integrator",
    "ito_bracket",
    "bracket_vanishing",
    "bracket_properties",
    "fubini",
    "see_weak_residual",
    "see_fubini",
)


class ConfigError(ValueError):
    """Config file could not be parsed or validated."""


class GridModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    horizon: float = Field(gt=0.0)
    base_steps: int = Field(ge=1, le=1 << 14)
    extra_times: List[float] = Field(default_factory=list)

    @field_validator("extra_times")
    @classmethod
    def _times_in_range(cls, v, info):
        horizon = info.data.get("horizon")
        if horizon is not None and any(t < 0 or t > horizon for t in v):
            raise ValueError("extra_times must lie inside [0, horizon]")
        return v


class RateFunctionModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    times: List[float]
    values: List[float]

    @model_validator(mode="after")
    def _piecewise_shape(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("rate function needs matching nonempty times and values")
        if self.times[0] != 0.0:
            raise ValueError("rate function must start at time 0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("rate function times must be increasing")
        return self

    def build(self) -> PiecewiseRate:
        return PiecewiseRate(tuple(self.times), tuple(self.values))


class NoiseModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["brownian", "compound_poisson", "drift"]
    vol: float = Field(default=1.0, ge=0.0)
    rate: float = Field(default=1.0, ge=0.0)
    jump_mean: float = 1.0
    compensated: bool = False
    rate_function: Optional[RateFunctionModel] = None

    @model_validator(mode="after")
    def _drift_needs_rate(self):
        if self.kind == "drift" and self.rate_function is None:
            raise ValueError("drift noise requires a rate_function")
        return self

    def build(self) -> NoiseSpec:
        rf = self.rate_function.build() if self.rate_function is not None else None
        return NoiseSpec(
            kind=self.kind,
            vol=self.vol,
            rate=self.rate,
            jump_mean=self.jump_mean,
            compensated=self.compensated,
            rate_function=rf,
        )


class IntegrandModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Literal["constant", "linear_t", "left_limit"] = "constant"
    coordinate: int = Field(default=0, ge=0)
    scale: float = 1.0


class PartitionsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["dyadic", "jittered"] = "dyadic"
    levels: int = Field(default=4, ge=1, le=16)


class EnsembleModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenarios: int = Field(ge=1, le=1 << 16)
    master_seed: int = Field(ge=0)


class ThresholdsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ucp_threshold: float = Field(default=0.02, gt=0.0)
    slack: float = Field(default=1.25, ge=1.0)
    node_tol: float = Field(default=1e-10, gt=0.0)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grid: GridModel
    noise: List[NoiseModel] = Field(min_length=1, max_length=64)
    integrand: IntegrandModel = Field(default_factory=IntegrandModel)
    partitions: PartitionsModel = Field(default_factory=PartitionsModel)
    ensemble: EnsembleModel
    checks: List[str] = Field(min_length=1)
    thresholds: ThresholdsModel = Field(default_factory=ThresholdsModel)

    @field_validator("checks")
    @classmethod
    def _known_checks(cls, v):
        unknown = [name for name in v if name not in CHECK_NAMES]
        if unknown:
            raise ValueError(f"unknown checks: {unknown}; known: {list(CHECK_NAMES)}")
        if len(set(v)) != len(v):
            raise ValueError("duplicate check names")
        return v

    @model_validator(mode="after")
    def _coordinate_in_range(self):
        if self.integrand.coordinate >= len(self.noise):
            raise ValueError("integrand coordinate is outside the noise dimension")
        return self


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON config document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        lines = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()]
        raise ConfigError("config validation failed: " + "; ".join(lines)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def reference_config_path(name: str):
    """Filesystem path of a bundled reference config."""
    from importlib.resources import files

    path = files("seqsemi").joinpath("configs", f"{name}.json")
    if not path.is_file():
        available = sorted(p.name[:-5] for p in files("seqsemi").joinpath("configs").iterdir())
        raise ConfigError(f"no bundled config named {name!r}; available: {available}")
    return path


def apply_overrides(
    config: ExperimentConfig, seed: Optional[int] = None, scenarios: Optional[int] = None
) -> ExperimentConfig:
    """Copy with the ensemble seed or scenario count replaced."""
    if seed is None and scenarios is None:
        return config
    update = {}
    if seed is not None:
        update["master_seed"] = seed
    if scenarios is not None:
        update["scenarios"] = scenarios
    return config.model_copy(update={"ensemble": config.ensemble.model_copy(update=update)})
