"""Interior and boundary Sobolev norms, and the normal derivative stencils."""
import logging
from typing import Optional, Tuple, Union

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from src.domain.fields import GridField, Support, boundary_field
from src.domain.fourier import frequency_norms, zero_extend
from src.domain.geometry import Geometry, PatchSpec
from src.my_util.errors import SupportViolationError, UnsupportedExponentError

logger = logging.getLogger(__name__)

INTERIOR_EXPONENTS = (-1, 0, 1, 2)
BOUNDARY_EXPONENTS = (-1.5, -0.5, 0.0, 0.5, 1.0, 1.5)
FLUX_ORDER = 1
DEFAULT_STENCIL_ORDER = 2

PatchLike = Union[None, np.ndarray, PatchSpec]


def _full_grid_with_mask(field: GridField) -> Tuple[np.ndarray, np.ndarray]:
    geometry = field.geometry
    grid = geometry.full_grid(field.values, field.trace)
    idx = np.indices(grid.shape)
    on_face = ((idx == 0) | (idx == geometry.N)).sum(axis=0)
    return grid, on_face <= 1


def _gradient_energy(field: GridField) -> float:
    h = field.geometry.h
    if field.support is Support.TORUS:
        u = field.values
        return sum(float(np.sum(np.abs(np.roll(u, -1, axis=d) - u) ** 2)) for d in range(u.ndim)) / h**2
    grid, valid = _full_grid_with_mask(field)
    total = 0.0
    for d in range(grid.ndim):
        lo = [slice(None)] * grid.ndim
        hi = [slice(None)] * grid.ndim
        lo[d] = slice(0, -1)
        hi[d] = slice(1, None)
        pair = valid[tuple(lo)] & valid[tuple(hi)]
        diff = grid[tuple(hi)] - grid[tuple(lo)]
        total += float(np.sum(np.abs(diff[pair]) ** 2))
    return total / h**2


def _laplacian_energy(field: GridField) -> float:
    h = field.geometry.h
    if field.support is Support.TORUS:
        u = field.values
        lap = sum(np.roll(u, 1, axis=d) + np.roll(u, -1, axis=d) - 2 * u for d in range(u.ndim))
        return float(np.sum(np.abs(lap) ** 2)) / h**4
    grid, _ = _full_grid_with_mask(field)
    n = grid.ndim
    centre = (slice(1, -1),) * n
    lap = -2.0 * n * grid[centre]
    for d in range(n):
        for shift in (0, 2):
            sl = [slice(1, -1)] * n
            sl[d] = slice(shift, shift + grid.shape[d] - 2)
            lap = lap + grid[tuple(sl)]
    return float(np.sum(np.abs(lap) ** 2)) / h**4


def sobolev_interior_norm(f: GridField, s: int) -> float:
    """
    Discrete H^s norm for s in {-1, 0, 1, 2}.

    s = -1 uses the torus Parseval form with weight (1+|η|²)^{-1}; s = 1 and
    s = 2 add finite-difference gradient and Laplacian energies to the L² part.
    """
    if s not in INTERIOR_EXPONENTS:
        raise UnsupportedExponentError(f"Interior exponent {s} not in {INTERIOR_EXPONENTS}")
    if f.support is Support.BOUNDARY:
        raise SupportViolationError("sobolev_interior_norm needs an interior or torus field")
    geometry = f.geometry
    vol = geometry.cell_volume
    if s == -1:
        ext = zero_extend(f)
        spectrum = vol * sfft.fftn(ext)
        torus_volume = vol * ext.size
        weight = 1.0 / (1.0 + frequency_norms(geometry, ext.shape))
        return float(np.sqrt(np.sum(weight * np.abs(spectrum) ** 2) / torus_volume))
    energy = vol * float(np.sum(np.abs(f.values) ** 2))
    if s >= 1:
        energy += vol * _gradient_energy(f)
    if s == 2:
        energy += vol * _laplacian_energy(f)
    return float(np.sqrt(energy))


def _patch_mask(geometry: Geometry, patch: PatchLike) -> Optional[np.ndarray]:
    if patch is None:
        return None
    if isinstance(patch, PatchSpec):
        return geometry.patch_mask(patch)
    mask = np.asarray(patch, dtype=bool)
    return None if mask.all() else mask


def boundary_gram(geometry: Geometry, s: float, patch: PatchLike = None) -> np.ndarray:
    """
    Gram matrix of the H^s(∂Ω) inner product, or of the quotient norm on a patch.

    On a patch P the quotient Gram is [((G^{-1})_PP)]^{-1}, the minimum of the
    whole-boundary norm over all extensions of the patch values.
    """
    if s not in BOUNDARY_EXPONENTS:
        raise UnsupportedExponentError(f"Boundary exponent {s} not in {BOUNDARY_EXPONENTS}")
    mu, vecs = geometry.boundary_eigensystem
    mask = _patch_mask(geometry, patch)
    area = geometry.face_area
    if mask is None:
        return area * (vecs * (1.0 + mu) ** s) @ vecs.T
    rows = vecs[mask]
    inverse_block = (rows * (1.0 + mu) ** (-s)) @ rows.T / area
    return sla.inv(inverse_block, check_finite=False)


def boundary_sobolev_norm(phi: GridField, s: float, patch: PatchLike = None) -> float:
    if phi.support is not Support.BOUNDARY:
        raise SupportViolationError("boundary_sobolev_norm needs a boundary field")
    geometry = phi.geometry
    if s not in BOUNDARY_EXPONENTS:
        raise UnsupportedExponentError(f"Boundary exponent {s} not in {BOUNDARY_EXPONENTS}")
    mask = _patch_mask(geometry, patch)
    if mask is None:
        mu, vecs = geometry.boundary_eigensystem
        coeffs = vecs.T @ phi.values
        return float(np.sqrt(geometry.face_area * np.sum((1.0 + mu) ** s * np.abs(coeffs) ** 2)))
    values = phi.values[mask]
    gram = boundary_gram(geometry, s, mask)
    return float(np.sqrt(max(np.real(np.vdot(values, gram @ values)), 0.0)))


def normal_derivative(u: GridField, order: int = DEFAULT_STENCIL_ORDER) -> GridField:
    """
    Outward normal derivative on every boundary node.

    order=2 is the one-sided stencil (3u_b - 4u_1 + u_2)/(2h); order=1 is the
    discrete flux (u_b - u_1)/h.
    """
    if u.support is not Support.INTERIOR or u.trace is None:
        raise SupportViolationError("normal_derivative needs an interior field with a boundary trace")
    geometry = u.geometry
    ub = u.trace
    u1 = u.values[geometry.boundary_inner1]
    if order == 1:
        values = (ub - u1) / geometry.h
    elif order == 2:
        u2 = u.values[geometry.boundary_inner2]
        values = (3.0 * ub - 4.0 * u1 + u2) / (2.0 * geometry.h)
    else:
        raise ValueError(f"Unsupported stencil order {order}")
    return boundary_field(geometry, values, name=f"dnu_{u.name}" if u.name else "dnu")
