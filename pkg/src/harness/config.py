"""
Experiment configuration: pydantic models, TOML/JSON loading and LAB_* environment overrides.
"""
import json
import logging
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import toml
from pydantic import BaseModel, Field, field_validator, model_validator

from src.domain.fields import Potential, admissible_pair, bump_potential
from src.domain.geometry import Geometry, GeometrySpec
from src.domain.norms import DEFAULT_STENCIL_ORDER
from src.forward.helmholtz import DEFAULT_ROBIN_STENCIL, ROBIN_STENCILS, ImpedanceParams
from src.my_util.errors import SupportViolationError
from src.spectral.weights import Variant

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).parent / "experiment_config.toml"


class QhatModeName(str, Enum):
    ORACLE = "oracle"
    DATA = "data"


class PotentialPairSpec(BaseModel):
    """q₂ = background, q₁ = background + bump (or q₁ = q₂ when `identical`)."""

    background: float = 0.0
    amplitude: float = 0.5
    radius: Optional[float] = None
    center: Optional[List[float]] = None
    kappa: Optional[float] = None
    identical: bool = False

    def build(self, geometry: Geometry) -> Tuple[Potential, Potential]:
        kappa = self.kappa if self.kappa is not None else abs(self.background) + abs(self.amplitude)
        q2 = Potential.constant(geometry, self.background, kappa=kappa)
        if self.identical:
            return q2, q2
        q1 = bump_potential(
            geometry,
            self.amplitude,
            radius=self.radius,
            center=self.center,
            background=self.background,
            kappa=kappa,
        )
        if not admissible_pair(q1, q2):
            raise SupportViolationError("q₁ - q₂ does not vanish on Ω₁")
        return q1, q2


class ScheduleKnobs(BaseModel):
    kappa: float = 1.0
    c: float = 1.0
    theta: float = 0.5
    delta_interp: float = 2.5
    cgo_tau_floor: float = 8.0
    s_override: Optional[float] = None
    fit_kappa: bool = False

    @field_validator("theta")
    @classmethod
    def _theta_in_unit_interval(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        return value

    @field_validator("kappa", "c")
    @classmethod
    def _nonnegative(cls, value: float) -> float:
        if value < 0:
            raise ValueError("schedule constants must be nonnegative")
        return value


class ImpedanceSpec(BaseModel):
    a: float = 1.0
    sign: int = 1
    lam0: float = 1.0
    stencil: str = DEFAULT_ROBIN_STENCIL

    @field_validator("sign")
    @classmethod
    def _sign(cls, value: int) -> int:
        if value not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return value

    @field_validator("stencil")
    @classmethod
    def _known_stencil(cls, value: str) -> str:
        if value not in ROBIN_STENCILS:
            raise ValueError(f"stencil must be one of {ROBIN_STENCILS}")
        return value

    def params(self, geometry: Geometry) -> ImpedanceParams:
        return ImpedanceParams.uniform(geometry, self.a, self.sign, self.lam0)


class OutputSpec(BaseModel):
    directory: str = "results"
    records_csv: str = "records.csv"
    records_json: str = "records.json"
    dump_fields: bool = False

    @property
    def csv_path(self) -> Path:
        return Path(self.directory) / self.records_csv

    @property
    def json_path(self) -> Path:
        return Path(self.directory) / self.records_json


class ExperimentConfig(BaseModel):
    name: str = "stability"
    geometry: GeometrySpec = Field(default_factory=GeometrySpec)
    potentials: PotentialPairSpec = Field(default_factory=PotentialPairSpec)
    lambdas: List[float] = Field(default_factory=lambda: [10.0])
    taus: List[float] = Field(default_factory=lambda: [8.0, 16.0, 32.0, 64.0])
    levels: List[float] = Field(default_factory=lambda: [0.0])
    schedule: ScheduleKnobs = Field(default_factory=ScheduleKnobs)
    variant: Variant = Variant.DIRICHLET
    impedance: ImpedanceSpec = Field(default_factory=ImpedanceSpec)
    qhat_mode: QhatModeName = QhatModeName.DATA
    basis_size: int = 32
    full_basis_size: int = 96
    runge_threshold: float = 1e-8
    max_runge_defect: float = 0.5
    spectral_window: int = 6
    dtn_stencil_order: int = DEFAULT_STENCIL_ORDER
    lambda_floor: float = 1.0
    seed: int = 0
    threads: int = 2
    output: OutputSpec = Field(default_factory=OutputSpec)

    @field_validator("levels")
    @classmethod
    def _levels_nonnegative(cls, value: List[float]) -> List[float]:
        if any(level < 0 for level in value):
            raise ValueError("perturbation levels must be nonnegative")
        return value

    @field_validator("dtn_stencil_order")
    @classmethod
    def _known_order(cls, value: int) -> int:
        if value not in (1, 2):
            raise ValueError("dtn_stencil_order must be 1 (flux) or 2 (one-sided)")
        return value

    @field_validator("basis_size", "full_basis_size", "threads", "spectral_window")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @model_validator(mode="after")
    def _frequency_floor(self) -> "ExperimentConfig":
        floor = self.impedance.lam0 if self.variant is Variant.IMPEDANCE else self.lambda_floor
        low = [lam for lam in self.lambdas if lam < floor]
        if low:
            raise ValueError(f"λ values {low} below the floor {floor:g} for the {self.variant.value} variant")
        return self


def _read_config_file(path: Path) -> Dict[str, Any]:
    if path.suffix == ".json":
        return json.loads(path.read_text())
    with open(path, "r") as f:
        return toml.load(f)


def _apply_env_overrides(raw: Dict[str, Any]) -> Dict[str, Any]:
    """Override selected values with environment variables if they exist"""
    data = dict(raw)
    if os.getenv("LAB_SEED"):
        data["seed"] = int(os.getenv("LAB_SEED"))
    if os.getenv("LAB_THREADS"):
        data["threads"] = int(os.getenv("LAB_THREADS"))
    if os.getenv("LAB_QHAT_MODE"):
        data["qhat_mode"] = os.getenv("LAB_QHAT_MODE")
    if os.getenv("LAB_BASIS_SIZE"):
        data["basis_size"] = int(os.getenv("LAB_BASIS_SIZE"))
    if os.getenv("LAB_OUTPUT_DIR"):
        output = dict(data.get("output", {}))
        output["directory"] = os.getenv("LAB_OUTPUT_DIR")
        data["output"] = output
    return data


def load_experiment_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Load a TOML or JSON experiment file, apply LAB_* environment overrides and
    then explicit overrides (command-line flags), and validate.
    """
    config_path = DEFAULT_CONFIG_PATH if path is None else Path(path)
    raw = _read_config_file(config_path)
    raw = _apply_env_overrides(raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "output_dir":
            output = dict(raw.get("output", {}))
            output["directory"] = str(value)
            raw["output"] = output
        else:
            raw[key] = value
    config = ExperimentConfig.model_validate(raw)
    logger.info(f"Configuration loaded from {config_path}:")
    logger.info(f"  - Variant: {config.variant.value}, q̂ mode: {config.qhat_mode.value}")
    logger.info(f"  - λ values: {config.lambdas}")
    logger.info(f"  - Perturbation levels: {config.levels}")
    logger.info(f"  - Seed: {config.seed}, threads: {config.threads}")
    return config
