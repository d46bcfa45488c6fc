"""
Quantitative Runge approximation by SVD truncation of the boundary-to-interior map.

T takes Γ-supported trace-basis coefficients (weighted by diag((1+μ)^s), the
discrete F^⊥ norm) to solution values on Ω₀ (weighted by h^n). With
K = √(h^n) T W^{-1/2} = Ũ S Ṽᴴ the left vectors are Ũ/√(h^n) and the right
vectors W^{-1/2}Ṽ, so T ψ_j = τ_j u_j with both families orthonormal.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla

from src.domain.fields import GridField, Potential, Support
from src.domain.geometry import Geometry
from src.domain.norms import sobolev_interior_norm
from src.forward.helmholtz import DEFAULT_MARGIN, FLUX_STENCIL, ImpedanceParams, helmholtz_operator, robin_operator
from src.forward.maps import DEFAULT_BASIS_SIZE, TraceBasis, trace_basis

logger = logging.getLogger(__name__)

DIRICHLET_EXPONENT = 1.5
ROBIN_EXPONENT = 0.5


@dataclass(frozen=True, eq=False)
class RungeOperator:
    geometry: Geometry
    lam: float
    potential_id: str
    basis: TraceBasis
    matrix: np.ndarray
    weights: np.ndarray
    singular_values: np.ndarray
    left: np.ndarray
    right: np.ndarray
    potential: Potential
    params: Optional[ImpedanceParams] = None

    @property
    def is_impedance(self) -> bool:
        return self.params is not None

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return self.matrix @ coeffs

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        """Discrete L²(Ω₀) inner product (u, v) = h^n Σ u conj(v)."""
        return complex(self.geometry.cell_volume * np.sum(u * np.conj(v)))

    def l2_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.geometry.cell_volume * np.sum(np.abs(u) ** 2)))

    def datum_norm(self, coeffs: np.ndarray) -> float:
        """‖φ‖ in the weighted F^⊥ norm."""
        return float(np.sqrt(np.sum(self.weights * np.abs(coeffs) ** 2)))


@dataclass
class RungeResult:
    threshold: float
    coefficients: np.ndarray
    boundary_datum: np.ndarray
    approximant: np.ndarray
    defect: np.ndarray
    projected_defect: np.ndarray
    defect_norm: float
    datum_norm: float
    source_norm: float
    kept_modes: int
    global_norm: Optional[float] = None

    def check(self, tol: float = 1e-10) -> None:
        """‖φ_t‖·t ≤ ‖u₀‖ (exact discrete inequality)."""
        if self.threshold > 0 and self.datum_norm * self.threshold > self.source_norm * (1.0 + tol) + tol:
            raise AssertionError(
                f"Runge datum bound violated: {self.datum_norm * self.threshold:.6e} > {self.source_norm:.6e}"
            )


def assemble_runge_operator(
    q: Potential,
    lam: float,
    geometry: Optional[Geometry] = None,
    basis_size: int = DEFAULT_BASIS_SIZE,
    basis: Optional[TraceBasis] = None,
    params: Optional[ImpedanceParams] = None,
    margin: float = DEFAULT_MARGIN,
) -> RungeOperator:
    """Column j is the Ω₀ restriction of the solution with boundary datum ψ_j; SVD included."""
    geometry = q.geometry if geometry is None else geometry
    basis = trace_basis(geometry, geometry.gamma_mask, basis_size) if basis is None else basis
    omega0 = geometry.omega0_mask
    columns = []
    if params is None:
        operator = helmholtz_operator(q, lam, margin)
        for j in range(basis.size):
            columns.append(operator.solve(None, basis.vectors[:, j])[omega0])
        exponent = DIRICHLET_EXPONENT
    else:
        # must match the boundary closure of full_boundary_map
        robin = robin_operator(q, lam, params, FLUX_STENCIL)
        for j in range(basis.size):
            columns.append(robin.solve(None, basis.vectors[:, j])[0][omega0])
        exponent = ROBIN_EXPONENT
    matrix = np.column_stack(columns)
    weights = (1.0 + basis.mu) ** exponent
    root_vol = np.sqrt(geometry.cell_volume)
    scaled = root_vol * matrix / np.sqrt(weights)
    u_tilde, sing, vh = sla.svd(scaled, full_matrices=False)
    left = u_tilde / root_vol
    right = vh.conj().T / np.sqrt(weights)[:, None]
    logger.info(
        f"Runge operator λ={lam:g}: {matrix.shape[0]}×{matrix.shape[1]}, "
        f"τ ∈ [{sing[-1]:.3e}, {sing[0]:.3e}]"
    )
    return RungeOperator(geometry, float(lam), q.fingerprint, basis, matrix, weights, sing, left, right, q, params)


def _as_omega0_values(op: RungeOperator, u0: Union[np.ndarray, GridField]) -> np.ndarray:
    if isinstance(u0, GridField):
        if u0.support is not Support.INTERIOR:
            raise ValueError("Runge source must be an interior field")
        return u0.values[op.geometry.omega0_mask]
    values = np.asarray(u0)
    if values.size == op.geometry.interior_count:
        return values[op.geometry.omega0_mask]
    return values


def runge_approximate(
    op: RungeOperator,
    u0: Union[np.ndarray, GridField],
    t: float,
    with_global: bool = False,
) -> RungeResult:
    """
    Truncated construction φ_t = Σ_{τ_j > t} τ_j^{-1} a_j ψ_j with a_j = (u₀, u_j).

    `defect` is u₀ - Tφ_t; `projected_defect` is its part inside span(u_j).
    """
    if t < 0:
        raise ValueError("Threshold t must be nonnegative")
    u = _as_omega0_values(op, u0)
    tau = op.singular_values
    a = op.geometry.cell_volume * (op.left.conj().T @ u)
    keep = (tau > t) & (tau > 0)
    coeffs = op.right[:, keep] @ (a[keep] / tau[keep])
    approximant = op.apply(coeffs)
    defect = u - approximant
    projected = op.left[:, ~keep] @ a[~keep]
    result = RungeResult(
        threshold=float(t),
        coefficients=coeffs,
        boundary_datum=op.basis.vectors @ coeffs,
        approximant=approximant,
        defect=defect,
        projected_defect=projected,
        defect_norm=op.l2_norm(defect),
        datum_norm=float(np.sqrt(np.sum(np.abs(a[keep]) ** 2 / tau[keep] ** 2))),
        source_norm=op.l2_norm(u),
        kept_modes=int(keep.sum()),
    )
    if with_global:
        result.global_norm = runge_global_norm(op, result)
    logger.debug(
        f"Runge t={t:.3e}: kept {result.kept_modes}/{tau.size} modes, "
        f"‖v_t‖={result.defect_norm:.3e}, ‖φ_t‖={result.datum_norm:.3e}"
    )
    return result


def global_approximant(op: RungeOperator, result: RungeResult) -> GridField:
    """The global solution on Ω whose boundary datum is φ_t."""
    datum = result.boundary_datum
    if op.params is None:
        values = helmholtz_operator(op.potential, op.lam).solve(None, datum)
        trace = datum
    else:
        values, trace = robin_operator(op.potential, op.lam, op.params).solve(None, datum)
    return GridField(op.geometry, values, Support.INTERIOR, trace=trace, name="v")


def runge_global_norm(op: RungeOperator, result: RungeResult) -> float:
    """‖v‖_{H²(Ω)} proxy of the global approximant."""
    return sobolev_interior_norm(global_approximant(op, result), 2)


@dataclass
class TradeoffPoint:
    t: float
    defect_norm: float
    datum_norm: float
    kept_modes: int


def runge_tradeoff_curve(op: RungeOperator, u0: Union[np.ndarray, GridField], ts: Sequence[float]) -> List[TradeoffPoint]:
    """(t, ‖v_t‖, ‖φ_t‖) for each threshold, in the given order."""
    points = []
    for t in ts:
        result = runge_approximate(op, u0, float(t))
        points.append(TradeoffPoint(float(t), result.defect_norm, result.datum_norm, result.kept_modes))
    return points


def threshold_schedule_log(eps: float, c: float) -> float:
    """log t for t = ε^{1/2} e^{-4e^{c/ε}}."""
    if not 0 < eps:
        raise ValueError("ε must be positive")
    ratio = c / eps
    if ratio > 700.0:
        return -np.inf
    return 0.5 * np.log(eps) - 4.0 * np.exp(ratio)


def threshold_schedule(eps: float, c: float) -> float:
    return float(np.exp(threshold_schedule_log(eps, c)))
