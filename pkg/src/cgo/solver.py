"""Fixed-point construction of CGO solutions u_ξ = e^{-ix·ξ}(1 + w_ξ)."""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from src.cgo.faddeev import CgoTorus, FaddeevMultiplier, faddeev_multiplier
from src.cgo.frequency import FrequencyPair, make_frequency_pair
from src.domain.fields import GridField, Potential, Support, interior_field
from src.my_util.errors import ContractionFailureError, ConvergenceError, MismatchedPairError

logger = logging.getLogger(__name__)

UPDATE_TOL = 1e-10
MAX_ITERATIONS = 50
DIVERGENCE_STREAK = 5
RESIDUAL_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class CgoSolution:
    """
    CGO solution sampled on X (flat, C order of the X box).

    `residual` is the spectral residual ‖(-Δ+q-λ)u‖/‖u‖ on X and is the
    acceptance quantity; `stencil_residual` applies the 7-point operator on the
    nodes of X with a full stencil and is reported as a diagnostic only.
    """

    xi: np.ndarray
    torus: CgoTorus
    w: np.ndarray
    u: np.ndarray
    iterations: int
    final_update: float
    residual: float
    stencil_residual: float
    imag_norm: float
    contraction_factors: List[float] = field(default_factory=list)

    @property
    def w_norm(self) -> float:
        return self.torus.x_norm(self.w)

    @property
    def u_norm(self) -> float:
        return self.torus.x_norm(self.u)

    @property
    def remainder_bound(self) -> float:
        """‖w_ξ‖_{L²(X)}·|Im ξ|, predicted to stay bounded."""
        return self.w_norm * self.imag_norm

    @property
    def lipschitz_estimate(self) -> float:
        return max(self.contraction_factors) if self.contraction_factors else 0.0

    @property
    def x_points(self) -> np.ndarray:
        return self.torus.points[self.torus.x_region].reshape(-1, self.torus.n)

    def on_omega0(self) -> np.ndarray:
        return self.u[self.torus.omega0_in_x]

    def remainder_field(self) -> GridField:
        """w_ξ on interior nodes, zero outside X."""
        geometry = self.torus.geometry
        values = np.zeros(geometry.interior_count, dtype=complex)
        values[self.torus.x_interior_index] = self.w
        return interior_field(geometry, values, name="w_xi")

    def as_interior_field(self) -> GridField:
        """u_ξ on interior nodes, zero outside X."""
        geometry = self.torus.geometry
        values = np.zeros(geometry.interior_count, dtype=complex)
        values[self.torus.x_interior_index] = self.u
        return GridField(geometry, values, Support.INTERIOR, name="u_xi")

    def diagnostics(self) -> Dict[str, float]:
        return {
            "imag_norm": self.imag_norm,
            "iterations": float(self.iterations),
            "final_update": self.final_update,
            "residual": self.residual,
            "stencil_residual": self.stencil_residual,
            "w_norm": self.w_norm,
            "remainder_bound": self.remainder_bound,
            "lipschitz": self.lipschitz_estimate,
        }


def _stencil_residual(torus: CgoTorus, q_box: np.ndarray, lam: float, u_box: np.ndarray) -> float:
    h = torus.h
    n = u_box.ndim
    core = (slice(1, -1),) * n
    lap = 2.0 * n * u_box[core]
    for d in range(n):
        for start in (0, 2):
            sl = [slice(1, -1)] * n
            sl[d] = slice(start, start + u_box.shape[d] - 2)
            lap = lap - u_box[tuple(sl)]
    applied = lap / h**2 + (q_box[core] - lam) * u_box[core]
    denom = np.linalg.norm(u_box[core])
    return float(np.linalg.norm(applied) / denom) if denom > 0 else 0.0


def solve_cgo(
    q: Potential,
    xi: Union[np.ndarray, FrequencyPair],
    torus: Optional[CgoTorus] = None,
    tol: float = UPDATE_TOL,
    max_iterations: int = MAX_ITERATIONS,
    residual_tol: float = RESIDUAL_TOL,
    multiplier: Optional[FaddeevMultiplier] = None,
) -> CgoSolution:
    """
    Iterate w ← E_ξ[-q_X(1 + w)] on the periodic torus around X.

    Raises ContractionFailureError when the update grows five times in a row
    and ConvergenceError when the final residual misses `residual_tol`.
    """
    xi_vec = np.asarray(xi.xi1 if isinstance(xi, FrequencyPair) else xi, dtype=complex)
    lam_c = complex(xi_vec @ xi_vec)
    lam = lam_c.real
    torus = CgoTorus.around_omega0(q.geometry) if torus is None else torus
    multiplier = faddeev_multiplier(torus, xi_vec) if multiplier is None else multiplier
    imag_norm = float(np.linalg.norm(xi_vec.imag))
    q_torus = torus.embed(q.values)
    w = np.zeros(torus.shape, dtype=complex)
    previous_update: Optional[float] = None
    factors: List[float] = []
    growth_streak = 0
    update = np.inf
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        w_next = multiplier.apply(-q_torus * (1.0 + w))
        step = torus.restrict(w_next - w)
        update = torus.x_norm(step) / max(torus.x_norm(1.0 + torus.restrict(w_next)), 1e-300)
        w = w_next
        if previous_update is not None and previous_update > 0:
            ratio = update / previous_update
            factors.append(ratio)
            growth_streak = growth_streak + 1 if ratio > 1.0 else 0
            if growth_streak >= DIVERGENCE_STREAK:
                raise ContractionFailureError(imag_norm, max(factors[-DIVERGENCE_STREAK:]), iterations)
        previous_update = update
        if update <= tol:
            break
    if update > tol:
        logger.warning(f"CGO fixed point stopped at cap {max_iterations} with update {update:.3e}")

    residual_torus = multiplier.conjugated_operator(w) + q_torus * (1.0 + w)
    plane = np.exp(-1j * (torus.points[torus.x_region].reshape(-1, torus.n) @ xi_vec))
    w_x = torus.restrict(w)
    u_x = plane * (1.0 + w_x)
    u_norm = torus.x_norm(u_x)
    residual = torus.x_norm(plane * torus.restrict(residual_torus)) / u_norm if u_norm > 0 else 0.0
    box = (torus.x_side_nodes,) * torus.n
    stencil = _stencil_residual(torus, q_torus[torus.x_region], lam, u_x.reshape(box))
    if residual > residual_tol:
        raise ConvergenceError(
            f"CGO residual {residual:.3e} above {residual_tol:.0e} at |Im ξ|={imag_norm:.4g} "
            f"after {iterations} iterations"
        )
    logger.debug(
        f"CGO |Im ξ|={imag_norm:.4g}: {iterations} iterations, update {update:.2e}, "
        f"residual {residual:.2e}, stencil residual {stencil:.2e}, ‖w‖·|Im ξ| = {torus.x_norm(w_x) * imag_norm:.4g}"
    )
    return CgoSolution(
        xi=xi_vec,
        torus=torus,
        w=w_x,
        u=u_x,
        iterations=iterations,
        final_update=float(update),
        residual=float(residual),
        stencil_residual=stencil,
        imag_norm=imag_norm,
        contraction_factors=factors,
    )


def solve_cgo_pair(
    q: Potential, pair: FrequencyPair, torus: Optional[CgoTorus] = None, **kwargs: Any
) -> Tuple[CgoSolution, CgoSolution]:
    torus = CgoTorus.around_omega0(q.geometry) if torus is None else torus
    first = solve_cgo(q, pair.xi1, torus, **kwargs)
    second = solve_cgo(q, pair.xi2, torus, **kwargs)
    return first, second


def cgo_product_remainder(sol1: CgoSolution, sol2: CgoSolution, tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """
    (η, ρ) with u₁u₂ = e^{-iη·x} + ρ on X, ρ = e^{-iη·x}(w₁ + w₂ + w₁w₂).

    ξ₁ + ξ₂ must be real (η) and both solutions must share one torus.
    """
    layout1 = (sol1.torus.offset, sol1.torus.M, sol1.torus.x_lo, sol1.torus.x_hi)
    layout2 = (sol2.torus.offset, sol2.torus.M, sol2.torus.x_lo, sol2.torus.x_hi)
    if layout1 != layout2:
        raise MismatchedPairError("CGO solutions live on different tori")
    total = sol1.xi + sol2.xi
    scale = max(1.0, float(np.max(np.abs(sol1.xi))))
    if np.max(np.abs(total.imag)) > tol * scale:
        raise MismatchedPairError(f"ξ₁ + ξ₂ is not real: imaginary part {total.imag}")
    eta = total.real
    plane = np.exp(-1j * (sol1.x_points @ eta))
    rho = plane * (sol1.w + sol2.w + sol1.w * sol2.w)
    return eta, rho


@dataclass
class ContractionEstimate:
    tau: float
    imag_norm: float
    evaluations: int


def estimate_contraction_threshold(
    q: Potential,
    eta: Sequence[float],
    lam: float,
    tau_lo: float = 1.0,
    tau_hi: float = 64.0,
    steps: int = 8,
    torus: Optional[CgoTorus] = None,
) -> ContractionEstimate:
    """Bisect τ for the smallest value at which the fixed point converges for both ξ₁ and ξ₂."""
    torus = CgoTorus.around_omega0(q.geometry) if torus is None else torus
    evaluations = 0

    def converges(tau: float) -> bool:
        nonlocal evaluations
        evaluations += 1
        pair = make_frequency_pair(eta, tau, lam)
        try:
            solve_cgo_pair(q, pair, torus)
        except (ContractionFailureError, ConvergenceError):
            return False
        return True

    if converges(tau_lo):
        return ContractionEstimate(tau_lo, make_frequency_pair(eta, tau_lo, lam).imag_norm, evaluations)
    if not converges(tau_hi):
        pair = make_frequency_pair(eta, tau_hi, lam)
        raise ContractionFailureError(pair.imag_norm, float("nan"), MAX_ITERATIONS)
    lo, hi = tau_lo, tau_hi
    for _ in range(steps):
        mid = np.sqrt(lo * hi)
        if converges(mid):
            hi = mid
        else:
            lo = mid
    estimate = ContractionEstimate(hi, make_frequency_pair(eta, hi, lam).imag_norm, evaluations)
    logger.info(f"Contraction threshold ϖ_est ≈ |Im ξ| = {estimate.imag_norm:.4g} (τ = {hi:.4g})")
    return estimate


def fit_growth_rate(solutions: Sequence[CgoSolution]) -> float:
    """ϰ as the slope of log ‖u_ξ‖_{L²(X)} against |Im ξ|."""
    if len(solutions) < 2:
        raise ValueError("Need at least two CGO solutions to fit a growth rate")
    x = np.array([s.imag_norm for s in solutions])
    y = np.log([s.u_norm for s in solutions])
    return float(stats.linregress(x, y).slope)


def cgo_family(
    q: Potential,
    eta: Sequence[float],
    lam: float,
    taus: Sequence[float],
    torus: Optional[CgoTorus] = None,
) -> List[CgoSolution]:
    """ξ₁-solutions over a τ grid at fixed (η, λ)."""
    torus = CgoTorus.around_omega0(q.geometry) if torus is None else torus
    return [solve_cgo(q, make_frequency_pair(eta, tau, lam).xi1, torus) for tau in taus]
