"""Interior and boundary pairings of the Alessandrini identity."""
import logging
from typing import Union

import numpy as np

from src.cgo.solver import CgoSolution
from src.domain.fields import GridField, Support
from src.forward.maps import BoundaryMap, MapKind
from src.my_util.errors import BasisMismatchError, SupportViolationError

logger = logging.getLogger(__name__)

FieldLike = Union[GridField, CgoSolution, np.ndarray]

_PROJECTION_TOL = 1e-8


def _interior_values(u: FieldLike, size: int) -> np.ndarray:
    if isinstance(u, CgoSolution):
        return u.as_interior_field().values
    if isinstance(u, GridField):
        if u.support is not Support.INTERIOR:
            raise SupportViolationError("Pairings need interior fields")
        return u.values
    values = np.asarray(u)
    if values.size != size:
        raise ValueError(f"Expected {size} interior values, got {values.size}")
    return values.ravel()


def pairing_interior(dq: GridField, u1: FieldLike, u2: FieldLike) -> complex:
    """h^n Σ_{Ω₀} dq u₁ u₂ (bilinear, no conjugation)."""
    geometry = dq.geometry
    shell = geometry.omega1_mask
    if np.any(dq.values[shell] != 0):
        raise SupportViolationError(
            f"dq has {int(np.count_nonzero(dq.values[shell]))} nonzero values on Ω₁"
        )
    inner = geometry.omega0_mask
    a = _interior_values(u1, geometry.interior_count)[inner]
    b = _interior_values(u2, geometry.interior_count)[inner]
    return complex(geometry.cell_volume * np.sum(dq.values[inner] * a * b))


def _coefficients(map_diff: BoundaryMap, trace: Union[np.ndarray, GridField]) -> np.ndarray:
    size = map_diff.matrix.shape[1]
    if isinstance(trace, GridField):
        if trace.support is not Support.BOUNDARY or map_diff.basis is None:
            raise BasisMismatchError("A boundary trace needs a map with a known input basis")
        coeffs = map_diff.basis.coefficients(trace.values)
        rebuilt = map_diff.basis.vectors @ coeffs
        scale = max(np.linalg.norm(trace.values), 1e-300)
        if np.linalg.norm(rebuilt - trace.values) > _PROJECTION_TOL * scale:
            raise BasisMismatchError("Boundary trace is not in the span of the map's input basis")
        return coeffs
    coeffs = np.asarray(trace).ravel()
    if coeffs.size != size:
        raise BasisMismatchError(f"Expected {size} basis coefficients, got {coeffs.size}")
    return coeffs


def pairing_boundary(
    map_diff: BoundaryMap,
    trace1: Union[np.ndarray, GridField],
    trace2: Union[np.ndarray, GridField],
) -> complex:
    """
    h^{n-1} Σ_Σ ((M₁ - M₂)φ₁)·φ₂ for traces given as input-basis coefficients.

    On full-boundary maps this equals the interior pairing of the two solutions;
    RtD differences enter with a minus sign.
    """
    if map_diff.basis is None or map_diff.sigma_mask is None:
        raise BasisMismatchError("Boundary pairing needs a map with basis and output patch")
    c1 = _coefficients(map_diff, trace1)
    c2 = _coefficients(map_diff, trace2)
    image = map_diff.apply(c1)
    second = (map_diff.basis.vectors @ c2)[map_diff.sigma_mask]
    value = complex(map_diff.basis.geometry.face_area * np.sum(image * second))
    return -value if map_diff.kind is MapKind.RTD else value
