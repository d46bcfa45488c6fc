"""Forward module - Dirichlet and impedance solvers and the partial boundary maps."""

from .helmholtz import (
    HelmholtzOperator,
    ImpedanceParams,
    RobinOperator,
    dirichlet_laplacian,
    solve_dirichlet,
    solve_robin,
)
from .maps import (
    BoundaryMap,
    MapKind,
    TraceBasis,
    assemble_dtn,
    assemble_rtd,
    full_boundary_map,
    operator_norm,
    trace_basis,
)

__all__ = [
    "HelmholtzOperator",
    "ImpedanceParams",
    "RobinOperator",
    "dirichlet_laplacian",
    "solve_dirichlet",
    "solve_robin",
    "BoundaryMap",
    "MapKind",
    "TraceBasis",
    "assemble_dtn",
    "assemble_rtd",
    "full_boundary_map",
    "operator_norm",
    "trace_basis",
]
