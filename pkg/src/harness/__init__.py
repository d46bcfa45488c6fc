"""Harness module - experiment configuration, stability sweeps, single-stage runs and scaling fits."""

from .config import (
    ExperimentConfig,
    ImpedanceSpec,
    OutputSpec,
    PotentialPairSpec,
    QhatModeName,
    ScheduleKnobs,
    load_experiment_config,
)
from .experiment_manager import (
    StabilityExperimentManager,
    run_impedance_experiment,
    run_impedance_experiment_sync,
    run_stability_experiment,
    run_stability_experiment_sync,
)
from .fitting import Coordinates, ScalingFit, fit_scaling, triple_log_coordinate
from .records import StabilityRecord, read_records_csv, write_records_csv, write_records_json

__all__ = [
    "ExperimentConfig",
    "ImpedanceSpec",
    "OutputSpec",
    "PotentialPairSpec",
    "QhatModeName",
    "ScheduleKnobs",
    "load_experiment_config",
    "StabilityExperimentManager",
    "run_impedance_experiment",
    "run_impedance_experiment_sync",
    "run_stability_experiment",
    "run_stability_experiment_sync",
    "Coordinates",
    "ScalingFit",
    "fit_scaling",
    "triple_log_coordinate",
    "StabilityRecord",
    "read_records_csv",
    "write_records_csv",
    "write_records_json",
]
