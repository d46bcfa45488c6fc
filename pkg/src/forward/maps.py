"""
Partial boundary maps as Sobolev-weighted matrices.

A map takes coefficients in a Γ-supported trace basis to values on the Σ nodes.
The input Gram is diag((1+μ_j)^{s_in}) over the basis eigenvalues; the output
Gram is the H^{s_out} quotient Gram on Σ.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from src.domain.fields import GridField, Potential, Support, boundary_field
from src.domain.geometry import Geometry
from src.domain.norms import DEFAULT_STENCIL_ORDER, FLUX_ORDER, boundary_gram, normal_derivative
from src.forward.helmholtz import (
    DEFAULT_MARGIN,
    DEFAULT_ROBIN_STENCIL,
    FLUX_STENCIL,
    ImpedanceParams,
    helmholtz_operator,
    robin_operator,
)
from src.my_util import fingerprint
from src.my_util.errors import BasisMismatchError
from src.my_util.my_io import write_array_bundle

logger = logging.getLogger(__name__)

DEFAULT_BASIS_SIZE = 32
DENSE_PATCH_LIMIT = 2000


class MapKind(Enum):
    DTN = "dtn"
    RTD = "rtd"

    @property
    def exponents(self) -> Tuple[float, float]:
        return (1.5, 0.5) if self is MapKind.DTN else (0.5, 1.5)


@dataclass(frozen=True, eq=False)
class TraceBasis:
    """L²(∂Ω)-orthonormal boundary modes supported on a patch."""

    geometry: Geometry
    mask: np.ndarray
    vectors: np.ndarray
    mu: np.ndarray

    @property
    def size(self) -> int:
        return int(self.vectors.shape[1])

    @cached_property
    def hash(self) -> str:
        return fingerprint(self.mask, self.vectors)

    def input_gram(self, s: float) -> np.ndarray:
        return np.diag((1.0 + self.mu) ** s)

    def synthesize(self, coeffs: np.ndarray) -> GridField:
        return boundary_field(self.geometry, self.vectors @ coeffs)

    def coefficients(self, phi: np.ndarray) -> np.ndarray:
        """L²(∂Ω) projection onto the basis."""
        return self.geometry.face_area * (self.vectors.T @ phi)


def trace_basis(geometry: Geometry, mask: Optional[np.ndarray] = None, size: int = DEFAULT_BASIS_SIZE) -> TraceBasis:
    """
    Lowest eigenvectors of the boundary Laplacian restricted to the patch.

    The restriction imposes a zero rim outside the patch. Vectors are scaled to
    unit L²(∂Ω) norm with the largest-magnitude entry positive.
    """
    mask = geometry.gamma_mask if mask is None else np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(mask)
    size = min(size, idx.size)
    block = geometry.boundary_laplacian[idx][:, idx]
    if idx.size <= DENSE_PATCH_LIMIT or size >= idx.size - 1:
        mu, vecs = sla.eigh(block.toarray(), subset_by_index=[0, size - 1])
    else:
        mu, vecs = spla.eigsh(block.tocsc(), k=size, sigma=-1.0, which="LM")
        order = np.argsort(mu)
        mu, vecs = mu[order], vecs[:, order]
    pivots = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivots, np.arange(size)])
    vecs = vecs * np.where(signs == 0, 1.0, signs)
    full = np.zeros((geometry.boundary_count, size))
    full[idx] = vecs / np.sqrt(geometry.face_area)
    logger.debug(f"Trace basis: {size} modes on {idx.size} patch nodes, μ ∈ [{mu[0]:.4g}, {mu[-1]:.4g}]")
    return TraceBasis(geometry, mask.copy(), full, np.clip(mu, 0.0, None))


@dataclass(frozen=True, eq=False)
class BoundaryMap:
    matrix: np.ndarray
    kind: MapKind = MapKind.DTN
    lam: float = 0.0
    potential_id: str = ""
    basis: Optional[TraceBasis] = None
    sigma_mask: Optional[np.ndarray] = None
    weight_in: Optional[np.ndarray] = None
    weight_out: Optional[np.ndarray] = None

    @property
    def s_in(self) -> float:
        return self.kind.exponents[0]

    @property
    def s_out(self) -> float:
        return self.kind.exponents[1]

    @classmethod
    def from_matrix(
        cls,
        matrix: np.ndarray,
        weight_in: Optional[np.ndarray] = None,
        weight_out: Optional[np.ndarray] = None,
        kind: MapKind = MapKind.DTN,
    ) -> "BoundaryMap":
        return cls(np.asarray(matrix), kind, weight_in=weight_in, weight_out=weight_out)

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return self.matrix @ coeffs

    def with_matrix(self, matrix: np.ndarray, potential_id: Optional[str] = None) -> "BoundaryMap":
        return replace(self, matrix=matrix, potential_id=self.potential_id if potential_id is None else potential_id)

    def difference(self, other: "BoundaryMap") -> "BoundaryMap":
        if self.kind is not other.kind or self.matrix.shape != other.matrix.shape:
            raise BasisMismatchError("Maps differ in kind or shape")
        if (self.basis is None) != (other.basis is None) or (
            self.basis is not None and other.basis is not None and self.basis.hash != other.basis.hash
        ):
            raise BasisMismatchError("Maps use different input bases")
        if self.sigma_mask is not None and other.sigma_mask is not None and not np.array_equal(
            self.sigma_mask, other.sigma_mask
        ):
            raise BasisMismatchError("Maps use different output patches")
        return self.with_matrix(self.matrix - other.matrix, f"{self.potential_id}-{other.potential_id}")

    def export(self, path: Union[str, Path]) -> Path:
        header = {
            "lam": self.lam,
            "kind": self.kind.value,
            "potential_id": self.potential_id,
            "basis_hash": None if self.basis is None else self.basis.hash,
            "s_in": self.s_in,
            "s_out": self.s_out,
            "weighted": self.weight_in is not None or self.weight_out is not None,
        }
        return write_array_bundle(path, self.matrix, header)


def _cholesky_upper(gram: Optional[np.ndarray], size: int) -> np.ndarray:
    if gram is None:
        return np.eye(size)
    return sla.cholesky(0.5 * (gram + gram.conj().T), lower=False)


def operator_norm(map_diff: BoundaryMap) -> float:
    """Largest singular value of R_out · M · R_in^{-1}, with G = RᴴR for each Gram."""
    matrix = map_diff.matrix
    if matrix.size == 0 or not np.any(matrix):
        return 0.0
    r_out = _cholesky_upper(map_diff.weight_out, matrix.shape[0])
    r_in = _cholesky_upper(map_diff.weight_in, matrix.shape[1])
    weighted = r_out @ sla.solve_triangular(r_in, matrix.T, lower=False, trans="T").T
    return float(sla.svdvals(weighted)[0])


def _weights(
    geometry: Geometry, basis: TraceBasis, sigma: np.ndarray, kind: MapKind, weighted: bool
) -> Tuple[Optional[np.ndarray], Optional[np.ndarray]]:
    if not weighted:
        return None, None
    s_in, s_out = kind.exponents
    return basis.input_gram(s_in), boundary_gram(geometry, s_out, sigma)


def assemble_dtn(
    q: Potential,
    lam: float,
    geometry: Optional[Geometry] = None,
    basis: Optional[TraceBasis] = None,
    basis_size: int = DEFAULT_BASIS_SIZE,
    sigma: Optional[np.ndarray] = None,
    stencil_order: int = DEFAULT_STENCIL_ORDER,
    weighted: bool = True,
    margin: float = DEFAULT_MARGIN,
) -> BoundaryMap:
    """One Dirichlet solve per basis column; output is ∂_ν u restricted to Σ."""
    geometry = q.geometry if geometry is None else geometry
    basis = trace_basis(geometry, geometry.gamma_mask, basis_size) if basis is None else basis
    sigma = geometry.sigma_mask if sigma is None else np.asarray(sigma, dtype=bool)
    operator = helmholtz_operator(q, lam, margin)
    columns = []
    for j in range(basis.size):
        phi = basis.vectors[:, j]
        u = GridField(geometry, operator.solve(None, phi), Support.INTERIOR, trace=phi)
        columns.append(normal_derivative(u, order=stencil_order).values[sigma])
    w_in, w_out = _weights(geometry, basis, sigma, MapKind.DTN, weighted)
    logger.info(f"Assembled DtN map λ={lam:g}: {int(sigma.sum())}×{basis.size}")
    return BoundaryMap(np.column_stack(columns), MapKind.DTN, float(lam), q.fingerprint, basis, sigma, w_in, w_out)


def assemble_rtd(
    q: Potential,
    lam: float,
    params: ImpedanceParams,
    geometry: Optional[Geometry] = None,
    basis: Optional[TraceBasis] = None,
    basis_size: int = DEFAULT_BASIS_SIZE,
    sigma: Optional[np.ndarray] = None,
    stencil: str = DEFAULT_ROBIN_STENCIL,
    weighted: bool = True,
) -> BoundaryMap:
    """One Robin solve per basis column; output is the trace on Σ."""
    geometry = q.geometry if geometry is None else geometry
    basis = trace_basis(geometry, geometry.gamma_mask, basis_size) if basis is None else basis
    sigma = geometry.sigma_mask if sigma is None else np.asarray(sigma, dtype=bool)
    operator = robin_operator(q, lam, params, stencil)
    columns = [operator.solve(None, basis.vectors[:, j])[1][sigma] for j in range(basis.size)]
    w_in, w_out = _weights(geometry, basis, sigma, MapKind.RTD, weighted)
    logger.info(f"Assembled RtD map λ={lam:g}: {int(sigma.sum())}×{basis.size}")
    return BoundaryMap(np.column_stack(columns), MapKind.RTD, float(lam), q.fingerprint, basis, sigma, w_in, w_out)


def full_boundary_map(
    q: Potential,
    lam: float,
    basis: TraceBasis,
    params: Optional[ImpedanceParams] = None,
    weighted: bool = False,
) -> BoundaryMap:
    """
    Map with Γ = Σ = ∂Ω, as used by the boundary pairing.

    Always built with the flux stencil: the discrete Green identity behind the
    pairing is exact only for that boundary closure.
    """
    everywhere = np.ones(q.geometry.boundary_count, dtype=bool)
    if params is None:
        return assemble_dtn(q, lam, basis=basis, sigma=everywhere, stencil_order=FLUX_ORDER, weighted=weighted)
    return assemble_rtd(q, lam, params, basis=basis, sigma=everywhere, stencil=FLUX_STENCIL, weighted=weighted)
