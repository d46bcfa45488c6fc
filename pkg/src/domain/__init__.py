"""Domain module - grid geometry, discrete fields, Fourier utilities and Sobolev norms."""

from .fields import (
    GridField,
    Potential,
    Support,
    admissible_pair,
    boundary_field,
    bump_potential,
    interior_field,
    zero_field,
)
from .fourier import (
    fourier_coefficient,
    fourier_transform,
    inverse_transform,
    lattice_index,
    lowpass_lattice,
    zero_extend,
)
from .geometry import Geometry, GeometrySpec, PatchSpec, build_geometry
from .norms import boundary_gram, boundary_sobolev_norm, normal_derivative, sobolev_interior_norm

__all__ = [
    "Geometry",
    "GeometrySpec",
    "PatchSpec",
    "build_geometry",
    "GridField",
    "Potential",
    "Support",
    "admissible_pair",
    "boundary_field",
    "bump_potential",
    "interior_field",
    "zero_field",
    "fourier_coefficient",
    "fourier_transform",
    "inverse_transform",
    "lattice_index",
    "lowpass_lattice",
    "zero_extend",
    "boundary_gram",
    "boundary_sobolev_norm",
    "normal_derivative",
    "sobolev_interior_norm",
]
