"""Hard low-pass inversion of Fourier samples on the torus dual lattice."""
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.domain.fields import GridField, interior_field
from src.domain.fourier import inverse_transform, lattice_index
from src.domain.geometry import Geometry


@dataclass
class LowpassResult:
    field: GridField
    tail_bound: float
    s: float
    modes: int

    @property
    def tail_norm_bound(self) -> float:
        """√tail_bound, on the same scale as an H^{-1} error norm."""
        return math.sqrt(self.tail_bound)


def tail_bound(geometry: Geometry, s: float, kappa: float) -> float:
    """Bound on the squared H^{-1} norm of the discarded tail: s⁻²κ²vol(Ω₀)."""
    volume = geometry.cell_volume * int(geometry.omega0_mask.sum())
    return float(kappa**2 * volume / s**2) if s > 0 else float("inf")


def tail_norm_bound(geometry: Geometry, s: float, kappa: float) -> float:
    return math.sqrt(tail_bound(geometry, s, kappa))


def lowpass_invert(
    geometry: Geometry,
    etas: np.ndarray,
    samples: Sequence[complex],
    s: float,
    kappa: Optional[float] = None,
) -> LowpassResult:
    """
    Inverse transform of the coefficients with |η| ≤ s (others set to 0).

    Returns the real part on interior nodes and the squared tail bound for the
    given sup-norm budget κ (inf when κ is unknown).
    """
    spectrum = np.zeros(geometry.torus_shape, dtype=complex)
    kept = 0
    for eta, value in zip(np.asarray(etas, dtype=float), samples):
        if np.linalg.norm(eta) <= s * (1.0 + 1e-12):
            spectrum[lattice_index(geometry, eta)] = value
            kept += 1
    values = np.real(inverse_transform(geometry, spectrum))
    bound = tail_bound(geometry, s, kappa) if kappa is not None else float("inf")
    return LowpassResult(interior_field(geometry, values, name="dq_rec"), bound, float(s), kept)
