import json
import os
from typing import Annotated, Any, List, Literal, Optional, Tuple

import numpy as np
from dotenv import load_dotenv
from pydantic import (
    AfterValidator,
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    model_validator,
)

from src.algebra.errors import ConfigError
from src.algebra.partitions import EpsilonSeq, parse_epsilon
from src.physics.spectral_model import DispersionSpec, FormFactor, GaussianSpec, PhysParams

load_dotenv()


class Config:
    """Process settings; none of them changes a numerical result."""

    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
    IFOCK_MAX_PAIRING_LENGTH = int(os.getenv("IFOCK_MAX_PAIRING_LENGTH", 16))
    IFOCK_METRICS_PATH = os.getenv("IFOCK_METRICS_PATH") or None


SCHEMA_VERSION = 1


def _as_epsilon(value: Any) -> EpsilonSeq:
    if isinstance(value, EpsilonSeq):
        return value
    try:
        return parse_epsilon(value)
    except TypeError as exc:
        raise ValueError(str(exc)) from exc


EpsilonField = Annotated[EpsilonSeq, BeforeValidator(_as_epsilon)]
FormFactorField = Annotated[GaussianSpec, AfterValidator(GaussianSpec.build)]


class Linspace(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    start: float
    stop: float
    num: PositiveInt


class ProbeGrid(BaseModel):
    """Explicit list of momenta, a single number, or a linspace {"start", "stop", "num"}."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    values: Tuple[float, ...]

    @model_validator(mode="before")
    @classmethod
    def _expand(cls, data: Any) -> Any:
        if isinstance(data, bool):
            raise ValueError("a momentum grid cannot be a boolean")
        if isinstance(data, (int, float)):
            return {"values": (data,)}
        if isinstance(data, (list, tuple)):
            return {"values": data}
        if isinstance(data, dict):
            if "values" in data:
                return data
            grid = Linspace.model_validate(data)
            return {"values": tuple(float(x) for x in np.linspace(grid.start, grid.stop, grid.num))}
        raise ValueError(f"expected a number, a list or a linspace object, got {data!r}")


class RunConfig(BaseModel):
    """
    Validated contents of a run configuration file.

    Attributes:
        schema_version: Always 1; written "schema" in the file
        phys: Physical constants and numerical tolerances
        dispersion: Reservoir dispersion, selected by its "type"
        form_factors: Gaussian form factors, referenced by index
        factor_indices: Form factor index for each position of epsilon
        epsilon: Creator/annihilator pattern (None when the file omits it)
        times: T_j per position
        probe_p: Particle momenta to evaluate at
        lambda_list: Couplings for pre-limit runs
        omega_probe: Probing frequencies for the responseless sector
        route: theorem1 | fock | noise | all
        kernel_factors: (f, g) indices used by kernel-scan
        output: Default CSV path
    """

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    schema_version: Literal[1] = Field(alias="schema")
    phys: PhysParams = Field(default_factory=PhysParams)
    dispersion: Optional[DispersionSpec] = None
    form_factors: Tuple[FormFactorField, ...] = ()
    factor_indices: Optional[Tuple[NonNegativeInt, ...]] = None
    epsilon: Optional[EpsilonField] = None
    times: Optional[Tuple[NonNegativeFloat, ...]] = None
    probe_p: ProbeGrid = Field(default_factory=lambda: ProbeGrid(values=(0.0,)))
    lambda_list: Tuple[PositiveFloat, ...] = ()
    omega_probe: ProbeGrid = Field(default_factory=lambda: ProbeGrid(values=()))
    route: Literal["theorem1", "fock", "noise", "all"] = "all"
    kernel_factors: Tuple[NonNegativeInt, NonNegativeInt] = (0, 0)
    output: Optional[str] = None

    @model_validator(mode="after")
    def _kernel_factors_in_range(self) -> "RunConfig":
        for i in self.kernel_factors:
            if self.form_factors and i >= len(self.form_factors):
                raise ValueError(f"kernel_factors index {i} outside 0..{len(self.form_factors) - 1}")
        return self

    def with_epsilon(self, eps: EpsilonSeq) -> "RunConfig":
        return self.model_copy(update={"epsilon": eps})

    def require(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            if isinstance(value, ProbeGrid):
                value = value.values
            if value is None or (isinstance(value, tuple) and not value):
                raise ConfigError(f"this command needs '{name}' in the configuration")

    def factors(self) -> List[FormFactor]:
        """One form factor per position of epsilon."""
        self.require("epsilon", "form_factors")
        if self.factor_indices is not None:
            indices = list(self.factor_indices)
        elif len(self.form_factors) == len(self.epsilon):
            indices = list(range(len(self.epsilon)))
        elif len(self.form_factors) == 1:
            indices = [0] * len(self.epsilon)
        else:
            raise ConfigError(
                f"{len(self.form_factors)} form factors for epsilon of length {len(self.epsilon)}; "
                "give factor_indices"
            )
        if len(indices) != len(self.epsilon):
            raise ConfigError(f"factor_indices has {len(indices)} entries, epsilon has {len(self.epsilon)}")
        for i in indices:
            if not i < len(self.form_factors):
                raise ConfigError(f"factor index {i} outside 0..{len(self.form_factors) - 1}")
        return [self.form_factors[i] for i in indices]

    def position_times(self) -> List[float]:
        self.require("epsilon", "times")
        if len(self.times) != len(self.epsilon):
            raise ConfigError(f"times has {len(self.times)} entries, epsilon has {len(self.epsilon)}")
        return list(self.times)


def parse_run_config(data: Any) -> RunConfig:
    """Validate a decoded configuration object; every failure is a ConfigError."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration {path} is not valid JSON: {exc}") from exc
    return parse_run_config(data)
