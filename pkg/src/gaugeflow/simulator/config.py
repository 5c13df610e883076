"""Run configuration: INI sections validated into a pydantic `SimConfig`."""

import configparser
import math
from pathlib import Path
from typing import Any, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from gaugeflow.simulator.services.grid import MIN_POINTS, FieldOptions, Grid
from gaugeflow.simulator.services.integrator import DEFAULT_STABILITY_FACTOR
from gaugeflow.symbolic.field_expr import DEFAULT_RHO_FLOOR, Params
from gaugeflow.utils.errors import ConfigError
from gaugeflow.utils.logger import get_logger

logger = get_logger(__name__)

SECTIONS = ("model", "grid", "time", "initial", "output", "tolerances")
MODEL_KEYS = ("name", "potential", "hbar", "m")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelSection(_Section):
    name: Literal["free", "dg", "jackiw", "eip", "custom"] = "free"
    potential: Optional[str] = None
    hbar: float = Field(default=1.0, gt=0.0)
    m: float = Field(default=1.0, gt=0.0)
    parameters: dict[str, float] = Field(default_factory=dict)

    @field_validator("hbar", "m")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value

    @field_validator("parameters")
    @classmethod
    def _finite_parameters(cls, values: dict[str, float]) -> dict[str, float]:
        for name, value in values.items():
            if not math.isfinite(value):
                raise ValueError(f"parameter {name} must be finite")
        return values

    @model_validator(mode="after")
    def _potential_for_custom(self) -> "ModelSection":
        if self.name == "custom" and not self.potential:
            raise ValueError("a custom model needs a potential expression")
        return self


class GridSection(_Section):
    L: float = Field(default=40.0, gt=0.0)
    N: int = 512

    @field_validator("N")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value < MIN_POINTS or value & (value - 1):
            raise ValueError(f"must be a power of two >= {MIN_POINTS}, got {value}")
        return value


class TimeSection(_Section):
    dt: float = Field(default=1e-4, gt=0.0)
    T: float = Field(default=1.0, gt=0.0)
    snapshot_every: int = Field(default=100, ge=1)
    stability_factor: float = Field(default=DEFAULT_STABILITY_FACTOR, gt=0.0)
    allow_unstable: bool = False

    @model_validator(mode="after")
    def _horizon_covers_step(self) -> "TimeSection":
        if self.T < self.dt:
            raise ValueError("T must be at least dt")
        return self


class InitialSection(_Section):
    kind: Literal["gaussian_on_background", "plane_wave"] = "gaussian_on_background"
    background: float = Field(default=0.5, ge=0.0)
    amplitude: float = 0.5
    width: float = Field(default=2.0, gt=0.0)
    momentum: float = 0.0
    center: Optional[float] = None


class OutputSection(_Section):
    directory: str = "runs/default"
    equation: Literal["psi", "phi", "both"] = "psi"
    rho_floor: float = Field(default=DEFAULT_RHO_FLOOR, gt=0.0)
    regularize: bool = False


class ToleranceSection(_Section):
    norm_drift: float = Field(default=1e-10, gt=0.0)
    gauge_density: float = Field(default=1e-6, gt=0.0)
    phase: float = Field(default=1e-5, gt=0.0)


class SimConfig(_Section):
    model: ModelSection = Field(default_factory=ModelSection)
    grid: GridSection = Field(default_factory=GridSection)
    time: TimeSection = Field(default_factory=TimeSection)
    initial: InitialSection = Field(default_factory=InitialSection)
    output: OutputSection = Field(default_factory=OutputSection)
    tolerances: ToleranceSection = Field(default_factory=ToleranceSection)

    @model_validator(mode="after")
    def _background_for_density_floors(self) -> "SimConfig":
        if self.model.name != "free" and self.initial.background <= 0.0:
            raise ValueError(
                "initial.background must be positive for models that divide by rho"
            )
        return self

    def params(self) -> Params:
        return Params(
            hbar=self.model.hbar,
            m=self.model.m,
            bindings=tuple(self.model.parameters.items()),
        )

    def build_grid(self) -> Grid:
        return Grid(L=self.grid.L, N=self.grid.N)

    def field_options(self) -> FieldOptions:
        return FieldOptions(
            hbar=self.model.hbar,
            rho_floor=self.output.rho_floor,
            regularize=self.output.regularize,
        )


def _error_key(location: tuple[Any, ...]) -> str:
    parts = [str(part) for part in location]
    if parts[:2] == ["model", "parameters"]:
        parts = ["model"] + parts[2:]
    return ".".join(parts) if parts else "config"


def validate_config(document: Mapping[str, Any]) -> SimConfig:
    """Validate a nested mapping; the first problem is raised with its dotted key."""
    try:
        return SimConfig.model_validate(document)
    except ValidationError as error:
        first = error.errors()[0]
        raise ConfigError(_error_key(tuple(first["loc"])), first["msg"]) from error


def _model_document(section: Mapping[str, str]) -> dict[str, Any]:
    document: dict[str, Any] = {key: section[key] for key in MODEL_KEYS if key in section}
    parameters = {key: value for key, value in section.items() if key not in MODEL_KEYS}
    if parameters:
        document["parameters"] = parameters
    return document


def parse_config_text(text: str, source: str = "<string>") -> SimConfig:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read_string(text, source=source)
    except configparser.Error as error:
        raise ConfigError(source, str(error).splitlines()[0]) from error

    document: dict[str, Any] = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(section, f"unknown section; expected one of {', '.join(SECTIONS)}")
        values = dict(parser.items(section))
        document[section] = _model_document(values) if section == "model" else values
    config = validate_config(document)
    logger.debug("Loaded configuration from %s: %s", source, config.model_dump())
    return config


def load_config(path: Path) -> SimConfig:
    if not path.exists():
        raise ConfigError(str(path), "configuration file not found")
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def apply_overrides(
    config: SimConfig,
    model: Optional[str] = None,
    potential: Optional[str] = None,
    parameters: Optional[Mapping[str, float]] = None,
    directory: Optional[str] = None,
    equation: Optional[str] = None,
) -> SimConfig:
    """Command-line flags take precedence over the file; the result is revalidated."""
    document = config.model_dump()
    if potential is not None:
        document["model"]["name"] = "custom"
        document["model"]["potential"] = potential
    elif model is not None:
        document["model"]["name"] = model
    for name, value in (parameters or {}).items():
        if name in ("hbar", "m"):
            document["model"][name] = value
        else:
            document["model"]["parameters"][name] = value
    if directory is not None:
        document["output"]["directory"] = directory
    if equation is not None:
        document["output"]["equation"] = equation
    return validate_config(document)
