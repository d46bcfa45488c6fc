"""Spectral weights e_λ, b_λ and the modulus prefactors."""
from enum import Enum
from typing import Iterable, Union

import numpy as np

from src.my_util.errors import SpectralDivergenceError, ThresholdError
from src.spectral.eigen import SpectralWindow

DIVERGENCE_GUARD = 1e-12


class Variant(Enum):
    DIRICHLET = "dirichlet"
    IMPEDANCE = "impedance"


def e_lambda(lam: float, spectra: Iterable[Union[SpectralWindow, np.ndarray]]) -> float:
    """max(1/d, 1) with d the distance from λ to the union of the listed eigenvalues."""
    values = [
        np.asarray(s.eigenvalues if isinstance(s, SpectralWindow) else s, dtype=float).ravel()
        for s in spectra
    ]
    if not values or sum(v.size for v in values) == 0:
        raise ValueError("e_lambda needs at least one eigenvalue")
    d = float(np.min(np.abs(np.concatenate(values) - lam)))
    if d < DIVERGENCE_GUARD:
        raise SpectralDivergenceError(f"dist(λ={lam:g}, σ) = {d:.3e} below guard {DIVERGENCE_GUARD:.0e}")
    return max(1.0 / d, 1.0)


def b_lambda(lam: float) -> float:
    """√(2 cosh(√λ/2))."""
    if lam <= 0:
        raise ValueError(f"b_λ needs λ > 0, got {lam}")
    return float(np.sqrt(2.0 * np.cosh(np.sqrt(lam) / 2.0)))


def modulus_prefactor(
    lam: float,
    e: float,
    variant: Union[Variant, str] = Variant.DIRICHLET,
    lam0: float = 1.0,
) -> float:
    """λ⁵e³b_λ for the Dirichlet problem, λ⁶b_λ for the impedance problem."""
    variant = Variant(variant)
    if variant is Variant.DIRICHLET:
        if lam < 1.0:
            raise ThresholdError(f"Dirichlet modulus needs λ ≥ 1, got {lam:g}")
        return float(lam**5 * e**3 * b_lambda(lam))
    if lam < lam0:
        raise ThresholdError(f"Impedance modulus needs λ ≥ λ₀={lam0:g}, got {lam:g}")
    return float(lam**6 * b_lambda(lam))
