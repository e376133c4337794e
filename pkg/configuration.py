import os
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from utilities.dispersion import Dispersion, from_preset
from utilities.errors import ConfigurationError, DispersionError, PotentialError
from utilities.potential import CosineBump, DiskIndicator, Potential, SquareIndicator, TabulatedShape

# Load environment variables
load_dotenv()

THREADS_VARIABLE = "SPECTRAL_THREADS"

Scalars = Union[float, List[float]]


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DispersionSection(Section):
    kind: Literal["dirac", "power", "multilayer"] = "dirac"
    d: float = Field(1.0, gt=0.0)
    layers: int = Field(2, ge=1)


class PotentialSection(Section):
    shape: Literal["square", "disk", "cosine", "tabulated"] = "square"
    side: float = 1.0
    radius: float = 0.5
    half_width: float = 0.5
    center: Tuple[float, float] = (0.0, 0.0)
    amplitudes: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    values: Optional[List[List[float]]] = None
    quadrature_order: int = Field(64, ge=4)


class ModelSection(Section):
    alpha: Scalars = 0.1
    beta: Scalars = 0.2

    @field_validator("alpha")
    @classmethod
    def check_alpha(cls, value: Scalars) -> Scalars:
        for alpha in value if isinstance(value, list) else [value]:
            if not (0.0 < alpha <= 0.5):
                raise ValueError("alpha must lie in (0, 0.5]")
        return value

    @field_validator("beta")
    @classmethod
    def check_beta(cls, value: Scalars) -> Scalars:
        for beta in value if isinstance(value, list) else [value]:
            if not beta >= 0.0:
                raise ValueError("beta must be non-negative")
        return value

    @property
    def alphas(self) -> List[float]:
        return list(self.alpha) if isinstance(self.alpha, list) else [self.alpha]

    @property
    def betas(self) -> List[float]:
        return list(self.beta) if isinstance(self.beta, list) else [self.beta]


class DiscretizationSection(Section):
    N: int = Field(8, ge=0)
    n_k: int = Field(32, ge=2)
    max_dim: int = Field(20_000, ge=2)


class SpectrumSection(Section):
    center: float = 0.0
    touch_tol: float = Field(1e-12, ge=0.0)
    seed_touching_point: bool = True
    spot_checks: int = Field(3, ge=0)
    inf_radii: int = Field(512, ge=8)
    inf_angles: int = Field(256, ge=8)
    kinetic_n_k: int = Field(64, ge=2)
    correction_constant: float = Field(0.0, ge=0.0)


class FeshbachSection(Section):
    z: float = 0.0
    k: Tuple[float, float] = (0.0, 0.0)
    window: Tuple[float, float] = (-0.01, 0.01)
    n_terms: int = Field(10, ge=1)
    certify_truncation: bool = True
    scaling_alphas: List[float] = [0.05, 0.1, 0.2, 0.4]

    @field_validator("window")
    @classmethod
    def check_window(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if value[0] >= value[1]:
            raise ValueError("window must be an increasing pair")
        return value


class KernelSection(Section):
    eps: float = Field(1e-3, ge=1e-4, le=1.0)
    radii: List[float] = [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0]
    max_doublings: int = Field(14, ge=1)
    tolerance: float = Field(1e-6, gt=0.0)
    quadrature_order: int = Field(16, ge=4)
    lattice_check: bool = True

    @field_validator("radii")
    @classmethod
    def check_radii(cls, value: List[float]) -> List[float]:
        if any(r < 1e-3 or r > 16.0 for r in value):
            raise ValueError("radii must lie in [1e-3, 16]")
        return value


class RunSection(Section):
    out_dir: str = "results"
    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)


class RunConfig(Section):
    dispersion: DispersionSection = DispersionSection()
    potential: PotentialSection = PotentialSection()
    model: ModelSection = ModelSection()
    discretization: DiscretizationSection = DiscretizationSection()
    spectrum: SpectrumSection = SpectrumSection()
    feshbach: FeshbachSection = FeshbachSection()
    kernel: KernelSection = KernelSection()
    run: RunSection = RunSection()


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        key = ".".join(str(piece) for piece in item["loc"])
        message = item["msg"].removeprefix("Value error, ")
        parts.append(f"{key}: {message}")
    return "; ".join(parts)


def parse_config(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        raise ConfigurationError(f"config is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping of sections")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(_describe(e)) from e


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError("config file not found", {"path": str(path)})
    return parse_config(path.read_text(encoding="utf-8"))


def get_dispersion(config: RunConfig) -> Dispersion:
    section = config.dispersion
    try:
        return from_preset(section.kind, d=section.d, layers=section.layers)
    except DispersionError as e:
        raise ConfigurationError(f"dispersion: {e}") from e


def get_potential(config: RunConfig) -> Potential:
    section = config.potential
    if section.shape == "tabulated" and section.values is None:
        raise ConfigurationError("potential.values: required for the tabulated shape")
    try:
        if section.shape == "square":
            shape = SquareIndicator(section.side, section.center)
        elif section.shape == "disk":
            shape = DiskIndicator(section.radius, section.center)
        elif section.shape == "cosine":
            shape = CosineBump(section.half_width, section.center, order=section.quadrature_order)
        else:
            shape = TabulatedShape(section.values)
        return Potential(shape, section.amplitudes)
    except PotentialError as e:
        raise ConfigurationError(f"potential: {e}") from e


def get_thread_count(config: RunConfig, override: Optional[int] = None) -> int:
    """--threads flag, then SPECTRAL_THREADS, then run.threads."""
    if override is not None:
        return max(1, int(override))
    value = os.getenv(THREADS_VARIABLE)
    if value:
        try:
            return max(1, int(value))
        except ValueError as e:
            raise ConfigurationError(f"{THREADS_VARIABLE} must be an integer", {"value": value}) from e
    return config.run.threads


def resolve_run(
    config: RunConfig,
    out_dir: Optional[str] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
) -> RunSection:
    """The run section with command-line overrides applied and validated."""
    values = config.run.model_dump()
    if out_dir is not None:
        values["out_dir"] = out_dir
    if seed is not None:
        values["seed"] = seed
    values["threads"] = get_thread_count(config, threads)
    try:
        return RunSection(**values)
    except ValidationError as e:
        raise ConfigurationError(f"run.{_describe(e)}") from e
