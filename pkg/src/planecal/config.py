"""Run configuration: one YAML file, schema-checked, every field optional.

Example::

    seed: 42
    method: sckf_lm
    methods: [ekf, sckf, lm, sckf_lm]
    nominal: default            # or six [alpha_deg, a_mm, d_mm, theta_deg] rows
    filter: {prior_angle_var: 1.0e-4, prior_length_var: 1.0e-2,
             process_var: 1.0e-12, measurement_sigma: 0.01}
    lm: {lambda_init: 1.0e-3, lambda_down: 0.7, lambda_up: 2.0,
         f_rtol: 1.0e-10, step_tol: 1.0e-12, max_iter: 500, mode: joint}
    pipeline: {relinearize_passes: 6, identifiable_snr: 1.0, validation_fraction: 0.2916666666666667}
    scenario: {n_samples: 120, noise_sigma: 0.01, n_planes: 3}
    samples: samples.csv
    out: out/

Unknown keys are rejected; errors name the offending field.
"""
from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .error_model import N_PARAMS, ParamDelta
from .errors import ConfigError
from .filters import MEASUREMENT_SIGMA, PRIOR_ANGLE_VAR, PRIOR_LENGTH_VAR, PROCESS_VAR
from .kinematics import NOMINAL_DH_DEG, DhTable
from .lm import LmSettings
from .measurements import DIAL_RANGE_MM
from .pipeline import METHODS, VALIDATION_FRACTION, PipelineConfig
from .plane import Plane
from .simulate import SimScenario, default_planes, random_truth

MethodName = Literal["ekf", "sckf", "lm", "sckf_lm"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FilterSection(_Strict):
    prior_angle_var: float = Field(PRIOR_ANGLE_VAR, gt=0, description="rad^2")
    prior_length_var: float = Field(PRIOR_LENGTH_VAR, gt=0, description="mm^2")
    process_var: float = Field(PROCESS_VAR, ge=0)
    measurement_sigma: float = Field(MEASUREMENT_SIGMA, gt=0, description="mm")


class LmSection(_Strict):
    lambda_init: float = Field(1e-3, gt=0)
    lambda_down: float = Field(0.7, gt=0, lt=1)
    lambda_up: float = Field(2.0, gt=1)
    f_rtol: float = Field(1e-10, ge=0)
    step_tol: float = Field(1e-12, ge=0)
    max_iter: int = Field(500, ge=1)
    mode: Literal["block", "joint"] = "joint"


class PipelineSection(_Strict):
    relinearize_passes: int = Field(6, ge=1)
    relinearize_tol: float = Field(1e-10, ge=0)
    observable_only: bool = True
    identifiable_snr: float = Field(1.0, ge=0)
    validation_fraction: float = Field(VALIDATION_FRACTION, ge=0, lt=1)


class PlaneSpec(_Strict):
    gamma: tuple[float, float, float]
    beta: tuple[float, float, float]


class ScenarioSection(_Strict):
    n_samples: int = Field(120, ge=4)
    noise_sigma: float = Field(0.01, ge=0, description="mm")
    n_planes: int = Field(3, ge=1, le=3, description="number of built-in placements")
    planes: Optional[list[PlaneSpec]] = Field(None, description="overrides n_planes")
    truth_angle_deg: float = Field(0.05, ge=0)
    truth_length_mm: float = Field(1.0, ge=0)
    truth_delta: Optional[list[float]] = Field(None, description="24 entries, ParamDelta order")
    coverage_mm: tuple[float, float] = (150.0, 150.0)
    tilt_max_deg: float = Field(10.0, ge=0, lt=90)
    spin_max_deg: float = Field(60.0, ge=0, le=180)
    dial_range_mm: float = Field(DIAL_RANGE_MM, gt=0)

    @field_validator("truth_delta")
    @classmethod
    def _len24(cls, v):
        if v is not None and len(v) != N_PARAMS:
            raise ValueError(f"needs {N_PARAMS} entries, got {len(v)}")
        return v


class RunConfig(_Strict):
    seed: int = 42
    method: MethodName = "sckf_lm"
    methods: list[MethodName] = Field(default_factory=lambda: list(METHODS), min_length=1)
    nominal: Union[Literal["default"], list[tuple[float, float, float, float]]] = "default"
    filter: FilterSection = FilterSection()
    lm: LmSection = LmSection()
    pipeline: PipelineSection = PipelineSection()
    scenario: ScenarioSection = ScenarioSection()
    samples: Optional[str] = None
    out: str = "out"

    @field_validator("nominal")
    @classmethod
    def _six_rows(cls, v):
        if v != "default" and len(v) != 6:
            raise ValueError(f"needs 6 rows [alpha_deg, a_mm, d_mm, theta_deg], got {len(v)}")
        return v

    def nominal_table(self) -> DhTable:
        return DhTable.from_degrees(NOMINAL_DH_DEG if self.nominal == "default" else self.nominal)

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            lm=LmSettings(**self.lm.model_dump()),
            seed=self.seed,
            **self.filter.model_dump(),
            **self.pipeline.model_dump(),
        )

    def scenario_obj(self) -> SimScenario:
        sc = self.scenario
        if sc.planes:
            planes = [Plane(p.gamma, p.beta) for p in sc.planes]
        else:
            planes = default_planes(sc.n_planes)
        if sc.truth_delta is not None:
            truth = ParamDelta(np.array(sc.truth_delta, dtype=float))
        else:
            truth = random_truth(np.random.default_rng([self.seed, 1]),
                                 sc.truth_angle_deg, sc.truth_length_mm)
        return SimScenario(self.nominal_table(), truth, tuple(planes), n_samples=sc.n_samples,
                           noise_sigma=sc.noise_sigma, seed=self.seed,
                           coverage=tuple(sc.coverage_mm), tilt_max_deg=sc.tilt_max_deg,
                           spin_max_deg=sc.spin_max_deg, dial_range=sc.dial_range_mm)

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")


def _format_errors(exc: ValidationError) -> str:
    parts = []
    for e in exc.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_config(data, source: str = "<config>") -> RunConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_errors(exc)}") from None


def load_config(path=None) -> RunConfig:
    """Read a YAML run config; ``None`` gives all defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return parse_config(data, str(path))
