"""
Experiment configuration
JSON file validated by pydantic, CLI flags applied on top
"""
import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.exceptions import ConfigError, DomainError
from app.core.utils import get_env_int, get_env_value
from app.models import GroundIntensity, ModelParams, Window

logger = logging.getLogger(__name__)

DEFAULT_SEED = get_env_int("POLYA_DEFAULT_SEED", 20240601)
DEFAULT_OUTPUT_DIR = get_env_value("POLYA_OUTPUT_DIR", "./reports")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ParamsConfig(_Section):
    z: float = 0.5
    w: float = 1.0

    @model_validator(mode="after")
    def _legal(self):
        try:
            ModelParams(self.z, self.w)
        except DomainError as e:
            raise ValueError(str(e))
        return self

    def to_params(self) -> ModelParams:
        return ModelParams(self.z, self.w)


class WindowConfig(_Section):
    lo: float = 0.0
    hi: float = 1.0

    @model_validator(mode="after")
    def _legal(self):
        try:
            Window(self.lo, self.hi)
        except DomainError as e:
            raise ValueError(str(e))
        return self

    def to_window(self) -> Window:
        return Window(self.lo, self.hi)


class ChainConfig(_Section):
    delta: float = Field(1.0, gt=0)
    K: int = Field(200, ge=1)


class OutputConfig(_Section):
    dir: str = DEFAULT_OUTPUT_DIR
    json_report: bool = True
    csv_report: bool = True


class SampleOptions(_Section):
    method: Literal["levy", "urn"] = "levy"
    count: int = Field(10, ge=1)
    window: WindowConfig = WindowConfig(lo=0.0, hi=2.0)


class SelfcheckOptions(_Section):
    m_max: int = Field(8, ge=1)


class EnsembleOptions(_Section):
    kind: Literal["sites", "height", "both"] = "height"
    n: Optional[int] = Field(None, ge=0)
    m: Optional[int] = Field(None, ge=0)
    k: Optional[int] = Field(None, ge=0)
    rho_b: float = Field(1.0, gt=0)
    samples: int = Field(20_000, ge=1)
    alpha: float = Field(0.01, gt=0, lt=1)

    @model_validator(mode="after")
    def _condition_complete(self):
        if self.kind == "sites" and self.n is None:
            raise ValueError("kind 'sites' needs n")
        if self.kind == "height" and self.m is None:
            raise ValueError("kind 'height' needs m")
        if self.kind == "both":
            if self.m is None or self.k is None:
                raise ValueError("kind 'both' needs m and k")
            if not 0 <= self.k <= self.m or (self.k == 0) != (self.m == 0):
                raise ValueError(f"no partition of {self.m} into {self.k} blocks")
        return self


class BoundaryOptions(_Section):
    ensembles: List[Literal["sites", "height", "both"]] = ["sites", "height", "both"]
    required_fraction: float = Field(0.95, gt=0, le=1)


class LdpOptions(_Section):
    u: float = Field(1.0, ge=0)
    v: Optional[float] = Field(None, ge=0)
    z_ref: float = Field(0.5, gt=0, lt=1)
    J: Optional[int] = Field(None, ge=1)
    concentration_rho: List[float] = [50.0, 200.0]
    concentration_replicas: int = Field(200, ge=1)
    limit_ks: List[int] = [1, 10, 100]
    limit_replicas: int = Field(2000, ge=2)

    @field_validator("limit_ks")
    @classmethod
    def _chain_indices(cls, ks):
        if not ks or any(k < 1 for k in ks):
            raise ValueError("limit_ks needs at least one chain index, all >= 1")
        return sorted(set(ks))

    @model_validator(mode="after")
    def _feasible(self):
        if self.v is not None and not (self.u > self.v > 0 or self.u == self.v == 0):
            raise ValueError(f"(u, v) = ({self.u}, {self.v}) needs u > v > 0 or u = v = 0")
        return self


class VerifyOptions(_Section):
    grid: Union[Literal["default"], List[Tuple[float, float]]] = "default"
    size: int = Field(1_000_000, ge=100)

    @field_validator("grid")
    @classmethod
    def _grid_legal(cls, grid):
        if grid == "default":
            return grid
        for z, rho_b in grid:
            if not 0 < z < 1 or not rho_b > 0:
                raise ValueError(f"grid point ({z}, {rho_b}) needs 0 < z < 1 and rho(B) > 0")
        return grid


class PriorConfig(_Section):
    name: str
    support: List[ParamsConfig] = Field(min_length=1)
    weights: Optional[List[float]] = None

    @model_validator(mode="after")
    def _weights(self):
        if self.weights is not None:
            if len(self.weights) != len(self.support):
                raise ValueError("weights and support differ in length")
            if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-12:
                raise ValueError("weights must be nonnegative and sum to 1")
        return self


DEFAULT_PRIORS = [
    PriorConfig(name="w", support=[ParamsConfig(z=0.5, w=1.0), ParamsConfig(z=0.5, w=3.0)]),
    PriorConfig(name="z", support=[ParamsConfig(z=0.3, w=1.0), ParamsConfig(z=0.6, w=1.0)]),
]


class PosteriorOptions(_Section):
    priors: List[PriorConfig] = Field(default_factory=lambda: [p.model_copy() for p in DEFAULT_PRIORS], min_length=1)
    # ground mass rho(B_K) of the largest window, split into K chain steps
    rho: float = Field(200.0, gt=0)
    K: int = Field(200, ge=1)
    statistic: Literal["profile", "sites", "height"] = "profile"
    threshold: float = Field(0.99, gt=0, lt=1)

    @field_validator("priors")
    @classmethod
    def _unique_names(cls, priors):
        names = [p.name for p in priors]
        if len(set(names)) != len(names):
            raise ValueError(f"prior names must be unique, got {names}")
        return priors


class DistCheckOptions(_Section):
    window: WindowConfig = WindowConfig(lo=0.0, hi=2.0)
    size: int = Field(100_000, ge=100)
    urn_size: Optional[int] = Field(None, ge=100)
    alpha: float = Field(0.01, gt=0, lt=1)


class ExperimentConfig(_Section):
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2 ** 64)
    params: ParamsConfig = ParamsConfig()
    ground_scale: float = Field(1.0, gt=0)
    chain: ChainConfig = ChainConfig()
    replicas: int = Field(200, ge=1)
    threads: Optional[int] = Field(None, ge=1)
    output: OutputConfig = OutputConfig()

    sample: SampleOptions = SampleOptions()
    selfcheck: SelfcheckOptions = SelfcheckOptions()
    ensemble: EnsembleOptions = EnsembleOptions(m=4)
    boundary: BoundaryOptions = BoundaryOptions()
    ldp: LdpOptions = LdpOptions()
    verify: VerifyOptions = VerifyOptions()
    posterior: PosteriorOptions = PosteriorOptions()
    dist_check: DistCheckOptions = DistCheckOptions()

    @property
    def ground(self) -> GroundIntensity:
        return GroundIntensity(self.ground_scale)

    def resolved(self) -> dict:
        """Config as plain JSON values, embedded in every report; output dir and threads do not affect results"""
        return self.model_dump(mode="json", exclude={"threads": True, "output": {"dir"}})


def _format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_format_validation_error(e)}") from e


def load_config(path: Optional[str] = None) -> ExperimentConfig:
    """Read and validate a JSON config file; defaults when no path is given"""
    if path is None:
        return ExperimentConfig()
    file = Path(path)
    try:
        text = file.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    config = parse_config(data)
    logger.info(f"✅ Loaded config {path}")
    return config


def apply_overrides(config: ExperimentConfig, seed: Optional[int] = None, out: Optional[str] = None,
                    threads: Optional[int] = None, json_report: Optional[bool] = None,
                    csv_report: Optional[bool] = None, **sections: dict) -> ExperimentConfig:
    """CLI flags over the file values; `sections` maps a section name to its field overrides"""
    data = config.model_dump()
    if seed is not None:
        data["seed"] = seed
    if threads is not None:
        data["threads"] = threads
    if out is not None:
        data["output"]["dir"] = out
    if json_report is not None:
        data["output"]["json_report"] = json_report
    if csv_report is not None:
        data["output"]["csv_report"] = csv_report
    for name, fields in sections.items():
        data[name].update({k: v for k, v in fields.items() if v is not None})
    return parse_config(data)
