"""
Fourier utilities on the zero-extension torus.

Interior node with full-grid index i sits at torus index i, so torus
coordinates coincide with physical ones and fftn evaluates the Riemann sum
h^n Σ f(x) e^{-iη·x} exactly on the dual lattice η ∈ (2π/T)ℤⁿ.
"""
from typing import List, Sequence, Tuple

import numpy as np
import scipy.fft as sfft

from src.domain.fields import GridField, Support
from src.domain.geometry import Geometry
from src.my_util.errors import OffLatticeError, SupportViolationError

_LATTICE_TOL = 1e-9


def torus_frequencies(geometry: Geometry) -> List[np.ndarray]:
    """Angular frequencies along each axis in FFT order."""
    M = geometry.torus_points
    return [2.0 * np.pi * sfft.fftfreq(M, d=geometry.h) for _ in range(geometry.n)]


def frequency_norms(geometry: Geometry, shape: Sequence[int] = (), spacing: float = 0.0) -> np.ndarray:
    """|η|² on an FFT grid (the geometry torus unless `shape`/`spacing` are given)."""
    shape = tuple(shape) or geometry.torus_shape
    d = spacing or geometry.h
    axes = [2.0 * np.pi * sfft.fftfreq(m, d=d) for m in shape]
    grids = np.meshgrid(*axes, indexing="ij")
    return sum(g**2 for g in grids)


def zero_extend(field: GridField) -> np.ndarray:
    if field.support is Support.TORUS:
        return field.values
    if field.support is not Support.INTERIOR:
        raise SupportViolationError("Only interior fields can be zero-extended")
    geometry = field.geometry
    out = np.zeros(geometry.torus_shape, dtype=field.values.dtype)
    region = (slice(1, geometry.N),) * geometry.n
    out[region] = field.values.reshape(geometry.interior_shape)
    return out


def fourier_transform(field: GridField) -> np.ndarray:
    """h^n · fftn of the zero extension: q̂ on the whole dual lattice."""
    return field.geometry.cell_volume * sfft.fftn(zero_extend(field))


def lattice_index(geometry: Geometry, eta: Sequence[float]) -> Tuple[int, ...]:
    """FFT index of a dual-lattice frequency; raises OffLatticeError otherwise."""
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (geometry.n,):
        raise ValueError(f"Frequency must have {geometry.n} components")
    k = eta * geometry.torus_side / (2.0 * np.pi)
    k_int = np.rint(k)
    if np.max(np.abs(k - k_int)) > _LATTICE_TOL * max(1.0, float(np.max(np.abs(k)))):
        raise OffLatticeError(f"η={eta.tolist()} is not on the dual lattice (2π/{geometry.torus_side:g})ℤⁿ")
    return tuple(int(v) % geometry.torus_points for v in k_int)


def fourier_coefficient(q: GridField, eta: Sequence[float]) -> complex:
    """Riemann sum h^n Σ q(x) e^{-iη·x} over interior nodes."""
    if q.support is not Support.INTERIOR:
        raise SupportViolationError("fourier_coefficient needs an interior field")
    geometry = q.geometry
    lattice_index(geometry, eta)
    phase = np.exp(-1j * (geometry.interior_points @ np.asarray(eta, dtype=float)))
    return complex(geometry.cell_volume * np.sum(q.values * phase))


def lowpass_lattice(geometry: Geometry, s: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    All dual-lattice frequencies with |η| ≤ s.

    Returns (frequencies, FFT indices), ordered lexicographically in the signed
    integer lattice coordinates.
    """
    step = 2.0 * np.pi / geometry.torus_side
    M = geometry.torus_points
    kmax = int(np.floor(s * (1.0 + 1e-12) / step))
    span = np.arange(max(-kmax, -(M // 2)), min(kmax, (M - 1) // 2) + 1)
    grid = np.stack(np.meshgrid(*([span] * geometry.n), indexing="ij"), axis=-1).reshape(-1, geometry.n)
    etas = grid * step
    keep = np.linalg.norm(etas, axis=1) <= s * (1.0 + 1e-12)
    return etas[keep], np.mod(grid[keep], M)


def inverse_transform(geometry: Geometry, coefficients: np.ndarray) -> np.ndarray:
    """Inverse of `fourier_transform`, restricted back to interior nodes."""
    values = sfft.ifftn(coefficients) / geometry.cell_volume
    region = (slice(1, geometry.N),) * geometry.n
    return values[region].ravel()
