"""CGO module - frequency pairs, the periodic Faddeev multiplier and the CGO fixed point."""

from .faddeev import CgoTorus, FaddeevMultiplier, faddeev_apply, faddeev_multiplier
from .frequency import FrequencyPair, make_frequency_pair
from .solver import (
    CgoSolution,
    ContractionEstimate,
    cgo_family,
    cgo_product_remainder,
    estimate_contraction_threshold,
    fit_growth_rate,
    solve_cgo,
    solve_cgo_pair,
)

__all__ = [
    "CgoTorus",
    "FaddeevMultiplier",
    "faddeev_apply",
    "faddeev_multiplier",
    "FrequencyPair",
    "make_frequency_pair",
    "CgoSolution",
    "ContractionEstimate",
    "cgo_family",
    "cgo_product_remainder",
    "estimate_contraction_threshold",
    "fit_growth_rate",
    "solve_cgo",
    "solve_cgo_pair",
]
