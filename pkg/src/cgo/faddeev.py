"""
Periodic Faddeev-type multiplier E_ξ on a torus containing X.

E_ξ divides by the symbol P_ξ(k) = k·k - 2ξ·k on the dual lattice shifted by
half a step, which removes the zero mode P_ξ(0) = 0. Coordinates are absolute,
so e^{-ix·ξ} built from `CgoTorus.points` agrees with physical positions.
"""
import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
import scipy.fft as sfft

from src.domain.fields import GridField, Support
from src.domain.geometry import Geometry
from src.my_util.errors import LatticeResonanceError

logger = logging.getLogger(__name__)

SYMBOL_GUARD = 1e-8


@dataclass(frozen=True, eq=False)
class CgoTorus:
    """
    Periodic grid of M points per axis; torus index j sits at full-grid index offset + j.

    X is the box of full-grid indices x_lo..x_hi (inclusive) on every axis.
    """

    geometry: Geometry
    offset: int
    x_lo: int
    x_hi: int
    M: int

    @classmethod
    def around_omega0(cls, geometry: Geometry, pad: int = 2, factor: float = 2.0) -> "CgoTorus":
        idx = geometry.interior_multi_index[geometry.omega0_mask]
        lo = max(int(idx.min()) - pad, 1)
        hi = min(int(idx.max()) + pad, geometry.N - 1)
        side = hi - lo + 1
        return cls(geometry, lo, lo, hi, int(round(factor * side)))

    @classmethod
    def zero_extension(cls, geometry: Geometry) -> "CgoTorus":
        return cls(geometry, 0, 1, geometry.N - 1, geometry.torus_points)

    @property
    def n(self) -> int:
        return self.geometry.n

    @property
    def h(self) -> float:
        return self.geometry.h

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.M,) * self.n

    @property
    def side(self) -> float:
        return self.M * self.h

    @property
    def x_side_nodes(self) -> int:
        return self.x_hi - self.x_lo + 1

    @property
    def x_volume(self) -> float:
        return self.geometry.cell_volume * self.x_side_nodes**self.n

    @property
    def x_region(self) -> Tuple[slice, ...]:
        start = self.x_lo - self.offset
        return (slice(start, start + self.x_side_nodes),) * self.n

    @cached_property
    def points(self) -> np.ndarray:
        """Coordinates, shape (M,)*n + (n,)."""
        axis = (self.offset + np.arange(self.M)) * self.h
        return np.stack(np.meshgrid(*([axis] * self.n), indexing="ij"), axis=-1)

    @cached_property
    def wavenumbers(self) -> List[np.ndarray]:
        return [2.0 * np.pi * sfft.fftfreq(self.M, d=self.h) for _ in range(self.n)]

    @cached_property
    def x_interior_index(self) -> np.ndarray:
        """Interior flat index of every X node, in C order of the X box."""
        span = np.arange(self.x_lo, self.x_hi + 1)
        grid = np.stack(np.meshgrid(*([span] * self.n), indexing="ij"), axis=-1).reshape(-1, self.n)
        return self.geometry.interior_flat_index(grid)

    @cached_property
    def omega0_in_x(self) -> np.ndarray:
        return self.geometry.omega0_mask[self.x_interior_index]

    def restrict(self, array: np.ndarray) -> np.ndarray:
        """Torus array → flat values on X."""
        return array[self.x_region].ravel()

    def embed(self, interior_values: np.ndarray) -> np.ndarray:
        """Interior values → torus array, zero outside X."""
        out = np.zeros(self.shape, dtype=np.result_type(interior_values, float))
        out[self.x_region] = interior_values[self.x_interior_index].reshape((self.x_side_nodes,) * self.n)
        return out

    def x_norm(self, values: np.ndarray) -> float:
        """Discrete L²(X) norm of flat X values."""
        return float(np.sqrt(self.geometry.cell_volume * np.sum(np.abs(values) ** 2)))


def _shift_candidates(n: int) -> List[np.ndarray]:
    out = [np.eye(n)[d] for d in range(n)]
    out += [np.eye(n)[a] + np.eye(n)[b] for a, b in itertools.combinations(range(n), 2)]
    out.append(np.ones(n))
    return out


@dataclass(frozen=True, eq=False)
class FaddeevMultiplier:
    torus: CgoTorus
    xi: np.ndarray
    shift: np.ndarray
    symbol: np.ndarray

    @cached_property
    def phase(self) -> np.ndarray:
        return np.exp(1j * (self.torus.points @ self.shift))

    @property
    def min_symbol(self) -> float:
        return float(np.min(np.abs(self.symbol)))

    @property
    def norm_bound(self) -> float:
        """max_k 1/|P_ξ(k)|, the L² operator norm of E_ξ."""
        return 1.0 / self.min_symbol

    def apply(self, f: np.ndarray) -> np.ndarray:
        spectrum = sfft.fftn(np.conj(self.phase) * f)
        return self.phase * sfft.ifftn(spectrum / self.symbol)

    def conjugated_operator(self, w: np.ndarray) -> np.ndarray:
        """(-Δ + 2iξ·∇)w evaluated spectrally on the shifted lattice."""
        spectrum = sfft.fftn(np.conj(self.phase) * w)
        return self.phase * sfft.ifftn(spectrum * self.symbol)


def symbol_on_lattice(torus: CgoTorus, xi: np.ndarray, shift: np.ndarray) -> np.ndarray:
    grids = np.meshgrid(*torus.wavenumbers, indexing="ij")
    symbol = np.zeros(torus.shape, dtype=complex)
    for d, g in enumerate(grids):
        k = g + shift[d]
        symbol += k * k - 2.0 * xi[d] * k
    return symbol


def faddeev_multiplier(torus: CgoTorus, xi: np.ndarray, guard: float = SYMBOL_GUARD) -> FaddeevMultiplier:
    """Pick the half-step lattice shift that maximizes min |P_ξ|."""
    xi = np.asarray(xi, dtype=complex)
    half_step = np.pi / torus.side
    best: Optional[FaddeevMultiplier] = None
    for direction in _shift_candidates(torus.n):
        shift = half_step * direction
        candidate = FaddeevMultiplier(torus, xi, shift, symbol_on_lattice(torus, xi, shift))
        if best is None or candidate.min_symbol > best.min_symbol:
            best = candidate
    assert best is not None
    if best.min_symbol < guard:
        raise LatticeResonanceError(best.min_symbol, guard)
    logger.debug(f"Faddeev shift {best.shift / half_step} with min |P_ξ| = {best.min_symbol:.4g}")
    return best


def faddeev_apply(xi: np.ndarray, f: GridField, torus: Optional[CgoTorus] = None) -> GridField:
    """E_ξ f for a torus field (default torus: the zero-extension torus of f's geometry)."""
    if f.support is not Support.TORUS:
        raise ValueError("faddeev_apply needs a torus field")
    torus = CgoTorus.zero_extension(f.geometry) if torus is None else torus
    if tuple(f.values.shape) != torus.shape:
        raise ValueError(f"Field shape {f.values.shape} does not match torus {torus.shape}")
    multiplier = faddeev_multiplier(torus, np.asarray(xi))
    return GridField(f.geometry, multiplier.apply(f.values), Support.TORUS, shape=torus.shape, name="E_xi f")
