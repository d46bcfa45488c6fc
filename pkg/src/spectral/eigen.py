"""Eigenpairs of A_q = -Δ_h + q near a frequency, and resolvent checks."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from src.domain.fields import GridField, Potential, Support
from src.domain.norms import sobolev_interior_norm
from src.forward.helmholtz import DENSE_LIMIT, HelmholtzOperator, LruCache, dirichlet_laplacian
from src.my_util.errors import ConvergenceError

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 500
RESIDUAL_TOL = 1e-8
SPECTRAL_CACHE_SIZE = 32


@dataclass(frozen=True, eq=False)
class SpectralWindow:
    """m eigenpairs of A_q nearest λ, sorted by distance."""

    potential_id: str
    lam: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def distance(self) -> float:
        return float(np.min(np.abs(self.eigenvalues - self.lam)))

    @property
    def nearest(self) -> float:
        return float(self.eigenvalues[0])

    def to_dict(self) -> Dict[str, object]:
        return {
            "potential_id": self.potential_id,
            "lam": self.lam,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "distance": self.distance,
        }


_CACHE = LruCache(capacity=SPECTRAL_CACHE_SIZE)


def stiffness_matrix(q: Potential) -> sp.csr_matrix:
    return (dirichlet_laplacian(q.geometry) + sp.diags(q.values)).tocsr()


def _dense_window(matrix: sp.csr_matrix, lam: float, m: int) -> Tuple[np.ndarray, np.ndarray]:
    vals, vecs = sla.eigh(matrix.toarray())
    order = np.argsort(np.abs(vals - lam), kind="stable")[:m]
    return vals[order], vecs[:, order]


def _shift_invert_window(matrix: sp.csr_matrix, lam: float, m: int) -> Tuple[np.ndarray, np.ndarray]:
    shift = lam
    v0 = np.ones(matrix.shape[0])
    for attempt in range(3):
        try:
            return spla.eigsh(matrix.tocsc(), k=m, sigma=shift, which="LM", v0=v0, maxiter=MAX_ITERATIONS)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(
                f"Shift-invert iteration at λ={lam:g} did not converge in {MAX_ITERATIONS} steps"
            ) from exc
        except RuntimeError:
            # exact hit on an eigenvalue makes the shifted factorization singular
            shift = lam + 1e-8 * max(abs(lam), 1.0) * (attempt + 1)
    raise ConvergenceError(f"Could not factor the shifted operator near λ={lam:g}")


def eigenpairs_near(q: Potential, lam: float, m: int = 6) -> SpectralWindow:
    """m eigenpairs of -Δ_h + q nearest λ (dense on small grids, shift-invert otherwise)."""
    if m < 1:
        raise ValueError("m must be at least 1")
    key = (q.geometry.cache_key, q.fingerprint, float(lam), int(m))
    return _CACHE.get(key, lambda: _compute_window(q, float(lam), int(m)))


def _compute_window(q: Potential, lam: float, m: int) -> SpectralWindow:
    matrix = stiffness_matrix(q)
    size = matrix.shape[0]
    m = min(m, size)
    if size <= DENSE_LIMIT or m >= size - 1:
        vals, vecs = _dense_window(matrix, lam, m)
    else:
        vals, vecs = _shift_invert_window(matrix, lam, m)
    order = np.argsort(np.abs(vals - lam), kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    residuals = np.linalg.norm(matrix @ vecs - vecs * vals, axis=0)
    bad = residuals > RESIDUAL_TOL * np.maximum(np.abs(vals), 1.0)
    if bad.any():
        raise ConvergenceError(f"Eigen-residual {residuals.max():.3e} above tolerance near λ={lam:g}")
    window = SpectralWindow(q.fingerprint, float(lam), vals, vecs, residuals)
    logger.debug(f"Spectral window near λ={lam:g}: nearest {window.nearest:.8g}, distance {window.distance:.3e}")
    return window


def clear_spectral_cache() -> None:
    _CACHE.clear()


def resolvent_norm(q: Potential, lam: float) -> float:
    """‖R_q(λ)‖ on L², which is 1/dist(λ, σ(A_h)) for the self-adjoint discrete operator."""
    return 1.0 / eigenpairs_near(q, lam, 1).distance


def in_admissible_class(q: Potential, q0: Potential, lam: float, kappa0: float) -> bool:
    """‖q - q₀‖∞ < min(‖R_{q₀}(λ)‖^{-1}, κ₀)."""
    gap = float(np.max(np.abs(q.values - q0.values)))
    return gap < min(eigenpairs_near(q0, lam, 1).distance, kappa0)


@dataclass
class ResolventReport:
    l2_ratio: float
    hj_ratio: float
    order: int
    inverse_distance: float
    nearest_eigenvalue: float

    @property
    def sharpness(self) -> float:
        """l2_ratio · dist(λ, σ); equals 1 on eigenvector inputs."""
        return self.l2_ratio / self.inverse_distance


def check_resolvent_bound(q: Potential, lam: float, f: GridField, order: int = 1) -> ResolventReport:
    """Measure ‖R(λ)f‖_{L²}/‖f‖ and ‖R(λ)f‖_{H^j}/(λ^{j/2}‖f‖) with zero boundary data."""
    if f.support is not Support.INTERIOR:
        raise ValueError("Resolvent input must be an interior field")
    operator = HelmholtzOperator(q, lam, check_spectrum=False)
    u = GridField(q.geometry, operator.solve(f.values, None), Support.INTERIOR,
                  trace=np.zeros(q.geometry.boundary_count))
    f_norm = sobolev_interior_norm(f, 0)
    window = eigenpairs_near(q, lam, 1)
    if f_norm == 0.0:
        l2_ratio = hj_ratio = 0.0
    else:
        l2_ratio = sobolev_interior_norm(u, 0) / f_norm
        hj_ratio = sobolev_interior_norm(u, order) / (max(lam, 1.0) ** (order / 2.0) * f_norm)
    return ResolventReport(l2_ratio, hj_ratio, order, 1.0 / window.distance, window.nearest)


def dense_spectrum(q: Potential) -> np.ndarray:
    return sla.eigvalsh(stiffness_matrix(q).toarray())


def sup_resolvent_ratio(q: Potential, lam: float, samples: Optional[np.ndarray] = None) -> float:
    """max over the given inputs (default: every dense eigenvector) of ‖R(λ)f‖/‖f‖."""
    matrix = stiffness_matrix(q)
    if samples is None:
        _, samples = sla.eigh(matrix.toarray())
    operator = HelmholtzOperator(q, lam, check_spectrum=False)
    best = 0.0
    for column in np.atleast_2d(samples.T):
        best = max(best, float(np.linalg.norm(operator.solve(column, None)) / np.linalg.norm(column)))
    return best
