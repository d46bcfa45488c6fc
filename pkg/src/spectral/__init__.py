"""Spectral module - eigenpairs near λ, spectral weights and resolvent checks."""

from .eigen import (
    ResolventReport,
    SpectralWindow,
    check_resolvent_bound,
    dense_spectrum,
    eigenpairs_near,
    in_admissible_class,
    resolvent_norm,
    sup_resolvent_ratio,
)
from .weights import Variant, b_lambda, e_lambda, modulus_prefactor

__all__ = [
    "ResolventReport",
    "SpectralWindow",
    "check_resolvent_bound",
    "dense_spectrum",
    "eigenpairs_near",
    "in_admissible_class",
    "resolvent_norm",
    "sup_resolvent_ratio",
    "Variant",
    "b_lambda",
    "e_lambda",
    "modulus_prefactor",
]
