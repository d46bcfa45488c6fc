"""Runge module - SVD truncation of the boundary-to-interior operator."""

from .approximation import (
    RungeOperator,
    RungeResult,
    TradeoffPoint,
    assemble_runge_operator,
    global_approximant,
    runge_approximate,
    runge_global_norm,
    runge_tradeoff_curve,
    threshold_schedule,
    threshold_schedule_log,
)

__all__ = [
    "RungeOperator",
    "RungeResult",
    "TradeoffPoint",
    "assemble_runge_operator",
    "global_approximant",
    "runge_approximate",
    "runge_global_norm",
    "runge_tradeoff_curve",
    "threshold_schedule",
    "threshold_schedule_log",
]
