"""Reconstruct module - q̂ estimation, schedules, low-pass inversion and the modulus Φ_c."""

from .lowpass import LowpassResult, lowpass_invert, tail_bound, tail_norm_bound
from .modulus import ModulusSpec, log_frak_e, on_triple_log_branch, phi_c, phi_c_log, triple_log
from .pairing import pairing_boundary, pairing_interior
from .qhat import QhatEstimate, QhatInputs, QhatMode, qhat_estimate, qhat_table
from .schedule import ScheduleParams, schedule, select_tau, select_tau_residual

__all__ = [
    "LowpassResult",
    "lowpass_invert",
    "tail_bound",
    "tail_norm_bound",
    "ModulusSpec",
    "log_frak_e",
    "on_triple_log_branch",
    "phi_c",
    "phi_c_log",
    "triple_log",
    "pairing_boundary",
    "pairing_interior",
    "QhatEstimate",
    "QhatInputs",
    "QhatMode",
    "qhat_estimate",
    "qhat_table",
    "ScheduleParams",
    "schedule",
    "select_tau",
    "select_tau_residual",
]
