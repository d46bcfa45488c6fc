"""
Grid geometry for the box domain Ω, the inner block Ω₀, the shell Ω₁ and the
boundary patches Γ, Σ.

Node conventions:
  - Full-grid multi-indices run over {0, ..., N}^n with x = index * h.
  - Interior nodes have every index in 1..N-1 and are ordered lexicographically
    (C order). Every interior operator matrix references this order.
  - Boundary nodes are the face-interior nodes: exactly one index in {0, N}.
    Edge and corner nodes never enter a 7-point stencil and carry no data.
"""
import logging
import re
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from pydantic import BaseModel, Field
from scipy import ndimage

from src.my_util.errors import GeometryError

logger = logging.getLogger(__name__)

_FACE_PATTERN = re.compile(r"^x(\d+)=([01])$")
_COORD_TOL = 1e-12


class PatchSpec(BaseModel):
    """Union of boundary faces (`"x1=0"`, `"x3=1"`, or `"all"`), optionally clipped to a box."""

    faces: List[str] = Field(default_factory=lambda: ["all"])
    bounds: Optional[List[Tuple[float, float]]] = None


class GeometrySpec(BaseModel):
    """Serializable description of a box geometry."""

    dimension: int = 3
    side: float = 1.0
    subdivisions: int = 16
    inner_side: float = 0.5
    inner_bounds: Optional[List[Tuple[float, float]]] = None
    gamma: PatchSpec = Field(default_factory=lambda: PatchSpec(faces=["x1=0"]))
    sigma: PatchSpec = Field(default_factory=lambda: PatchSpec(faces=["x1=1"]))
    torus_factor: float = 2.0


@dataclass(frozen=True, eq=False)
class Geometry:
    spec: GeometrySpec
    n: int
    side: float
    N: int
    h: float
    omega0_mask: np.ndarray
    omega0_bounds: Tuple[Tuple[float, float], ...]
    boundary_index: np.ndarray
    boundary_axis: np.ndarray
    boundary_side: np.ndarray
    boundary_inner1: np.ndarray
    boundary_inner2: np.ndarray
    gamma_mask: np.ndarray
    sigma_mask: np.ndarray

    @property
    def interior_shape(self) -> Tuple[int, ...]:
        return (self.N - 1,) * self.n

    @property
    def interior_count(self) -> int:
        return (self.N - 1) ** self.n

    @property
    def boundary_count(self) -> int:
        return int(self.boundary_index.shape[0])

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def face_area(self) -> float:
        return self.h ** (self.n - 1)

    @property
    def omega1_mask(self) -> np.ndarray:
        return ~self.omega0_mask

    @property
    def torus_side(self) -> float:
        return self.spec.torus_factor * self.side

    @property
    def torus_points(self) -> int:
        return int(round(self.torus_side / self.h))

    @property
    def torus_shape(self) -> Tuple[int, ...]:
        return (self.torus_points,) * self.n

    @cached_property
    def cache_key(self) -> str:
        """Identity of the grid for operator and spectral caches."""
        return f"{self.spec.model_dump_json()}|h={self.h!r}"

    @cached_property
    def interior_multi_index(self) -> np.ndarray:
        grids = np.indices(self.interior_shape).reshape(self.n, -1).T
        return grids + 1

    @cached_property
    def interior_points(self) -> np.ndarray:
        return self.interior_multi_index * self.h

    @cached_property
    def boundary_points(self) -> np.ndarray:
        return self.boundary_index * self.h

    @cached_property
    def boundary_normals(self) -> np.ndarray:
        normals = np.zeros((self.boundary_count, self.n))
        rows = np.arange(self.boundary_count)
        normals[rows, self.boundary_axis] = np.where(self.boundary_side == 1, 1.0, -1.0)
        return normals

    def interior_flat_index(self, multi_index: np.ndarray) -> np.ndarray:
        idx = np.atleast_2d(multi_index) - 1
        return np.ravel_multi_index(tuple(idx.T), self.interior_shape)

    def full_grid(self, values: np.ndarray, trace: Optional[np.ndarray] = None) -> np.ndarray:
        """Scatter interior values (and an optional trace) onto the (N+1)^n grid; edges stay 0."""
        values = np.asarray(values)
        dtype = np.result_type(values, trace if trace is not None else values)
        grid = np.zeros((self.N + 1,) * self.n, dtype=dtype)
        grid[(slice(1, self.N),) * self.n] = values.reshape(self.interior_shape)
        if trace is not None:
            grid[tuple(self.boundary_index.T)] = trace
        return grid

    def patch_mask(self, patch: PatchSpec) -> np.ndarray:
        mask = np.zeros(self.boundary_count, dtype=bool)
        for face in patch.faces:
            if face == "all":
                mask[:] = True
                continue
            match = _FACE_PATTERN.match(face.replace(" ", ""))
            if match is None:
                raise GeometryError(f"Unrecognized face selector '{face}'")
            axis = int(match.group(1)) - 1
            if not 0 <= axis < self.n:
                raise GeometryError(f"Face '{face}' refers to axis outside dimension {self.n}")
            side = int(match.group(2))
            mask |= (self.boundary_axis == axis) & (self.boundary_side == side)
        if patch.bounds is not None:
            if len(patch.bounds) != self.n:
                raise GeometryError("Patch bounds need one (lo, hi) pair per axis")
            pts = self.boundary_points
            for axis, (lo, hi) in enumerate(patch.bounds):
                mask &= (pts[:, axis] >= lo - _COORD_TOL) & (pts[:, axis] <= hi + _COORD_TOL)
        return mask

    @cached_property
    def boundary_laplacian(self) -> sp.csr_matrix:
        """
        Graph Laplacian of the boundary node set, scaled by 1/h².

        Neighbours are nodes on one face one step apart, plus the two nodes
        flanking a box edge, so the boundary graph is a closed discrete surface.
        """
        lookup = {tuple(idx): k for k, idx in enumerate(self.boundary_index)}
        rows: List[int] = []
        cols: List[int] = []
        for k, idx in enumerate(self.boundary_index):
            axis = int(self.boundary_axis[k])
            inward = 1 if self.boundary_side[k] == 0 else -1
            for d in range(self.n):
                if d == axis:
                    continue
                for step in (-1, 1):
                    nb = idx.copy()
                    nb[d] += step
                    j = lookup.get(tuple(nb))
                    if j is None and nb[d] in (0, self.N):
                        nb[axis] += inward
                        j = lookup.get(tuple(nb))
                    if j is not None:
                        rows.append(k)
                        cols.append(j)
        adjacency = sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(self.boundary_count,) * 2
        )
        adjacency = ((adjacency + adjacency.T) > 0).astype(float)
        degree = sp.diags(np.asarray(adjacency.sum(axis=1)).ravel())
        return ((degree - adjacency) / self.h**2).tocsr()

    @cached_property
    def boundary_eigensystem(self) -> Tuple[np.ndarray, np.ndarray]:
        """Dense eigendecomposition (μ ascending, Euclidean-orthonormal vectors)."""
        logger.debug(f"Dense boundary eigendecomposition on {self.boundary_count} nodes")
        mu, vecs = sla.eigh(self.boundary_laplacian.toarray())
        return np.clip(mu, 0.0, None), vecs

    def to_json(self) -> str:
        return self.spec.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Geometry":
        return build_geometry(GeometrySpec.model_validate_json(text))


def _omega0_bounds(spec: GeometrySpec) -> Tuple[Tuple[float, float], ...]:
    if spec.inner_bounds is not None:
        if len(spec.inner_bounds) != spec.dimension:
            raise GeometryError("inner_bounds needs one (lo, hi) pair per axis")
        return tuple((float(lo), float(hi)) for lo, hi in spec.inner_bounds)
    mid = spec.side / 2.0
    half = spec.inner_side / 2.0
    return ((mid - half, mid + half),) * spec.dimension


def build_geometry(spec: GeometrySpec) -> Geometry:
    """Build and validate a box geometry from its spec."""
    n, N = spec.dimension, spec.subdivisions
    if n < 1:
        raise GeometryError("dimension must be positive")
    if N < 4:
        raise GeometryError(f"Need at least 4 subdivisions per side, got {N}")
    h = spec.side / N

    full = np.indices((N + 1,) * n).reshape(n, -1).T
    on_face = (full == 0) | (full == N)
    face_count = on_face.sum(axis=1)
    interior_shape = (N - 1,) * n

    boundary_index = full[face_count == 1]
    boundary_axis = np.argmax(on_face[face_count == 1], axis=1)
    rows = np.arange(boundary_index.shape[0])
    boundary_side = (boundary_index[rows, boundary_axis] == N).astype(int)
    inward = np.where(boundary_side == 0, 1, -1)

    def _inner(steps: int) -> np.ndarray:
        idx = boundary_index.copy()
        idx[rows, boundary_axis] += steps * inward
        return np.ravel_multi_index(tuple((idx - 1).T), interior_shape)

    bounds = _omega0_bounds(spec)
    interior_pts = (np.indices(interior_shape).reshape(n, -1).T + 1) * h
    omega0 = np.ones(interior_pts.shape[0], dtype=bool)
    for axis, (lo, hi) in enumerate(bounds):
        omega0 &= (interior_pts[:, axis] >= lo - _COORD_TOL) & (interior_pts[:, axis] <= hi + _COORD_TOL)
    if not omega0.any():
        raise GeometryError("Ω₀ contains no grid nodes")
    inner_pts = interior_pts[omega0]
    margin = np.minimum(inner_pts, spec.side - inner_pts).min()
    if margin < 2 * h - _COORD_TOL:
        raise GeometryError(f"Ω₀ margin {margin:.4g} is below 2h = {2 * h:.4g}")

    shell = (~omega0).reshape(interior_shape)
    _, components = ndimage.label(shell)
    if components != 1:
        raise GeometryError(f"Ω₁ must be connected, found {components} components")

    geometry = Geometry(
        spec=spec,
        n=n,
        side=spec.side,
        N=N,
        h=h,
        omega0_mask=omega0,
        omega0_bounds=bounds,
        boundary_index=boundary_index,
        boundary_axis=boundary_axis,
        boundary_side=boundary_side,
        boundary_inner1=_inner(1),
        boundary_inner2=_inner(2),
        gamma_mask=np.zeros(boundary_index.shape[0], dtype=bool),
        sigma_mask=np.zeros(boundary_index.shape[0], dtype=bool),
    )
    gamma = geometry.patch_mask(spec.gamma)
    sigma = geometry.patch_mask(spec.sigma)
    if not gamma.any():
        raise GeometryError("Γ patch is empty")
    if not sigma.any():
        raise GeometryError("Σ patch is empty")
    geometry.gamma_mask[:] = gamma
    geometry.sigma_mask[:] = sigma
    logger.info(
        f"Geometry n={n} N={N} h={h:.4g}: {geometry.interior_count} interior nodes, "
        f"{int(omega0.sum())} in Ω₀, {geometry.boundary_count} boundary nodes "
        f"(|Γ|={int(gamma.sum())}, |Σ|={int(sigma.sum())})"
    )
    return geometry
