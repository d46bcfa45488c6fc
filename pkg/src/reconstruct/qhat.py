"""
Estimates of q̂(η) for dq = q₁ - q₂ from CGO pairs.

Oracle mode pairs dq against the CGO product directly. Data mode replaces the
CGOs on Ω₀ by Runge approximants, whose boundary data feed the boundary
pairing of the full-boundary map difference.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.cgo.faddeev import CgoTorus
from src.cgo.frequency import make_frequency_pair
from src.cgo.solver import CgoSolution, cgo_product_remainder, solve_cgo
from src.domain.fields import GridField, Potential
from src.forward.maps import BoundaryMap
from src.my_util.errors import RungeDefectError
from src.reconstruct.pairing import pairing_boundary, pairing_interior
from src.runge.approximation import RungeOperator, runge_approximate

logger = logging.getLogger(__name__)


class QhatMode(Enum):
    ORACLE = "oracle"
    DATA = "data"


@dataclass
class QhatInputs:
    """
    What each mode needs.

    Oracle: q1, q2. Data: additionally the full-boundary map difference and one
    Runge operator per potential, all sharing the map's input basis.
    """

    q1: Potential
    q2: Potential
    map_diff: Optional[BoundaryMap] = None
    runge1: Optional[RungeOperator] = None
    runge2: Optional[RungeOperator] = None
    runge_threshold: float = 0.0
    max_defect: float = 1.0
    torus: Optional[CgoTorus] = None

    @property
    def dq(self) -> GridField:
        return self.q1.difference(self.q2)


@dataclass
class QhatEstimate:
    eta: np.ndarray
    value: complex
    remainder: float
    tau: float
    mode: QhatMode
    cgo: List[Dict[str, float]] = field(default_factory=list)
    runge_defects: List[float] = field(default_factory=list)


def _relative_defect(op: RungeOperator, u_omega0: np.ndarray, t: float) -> Tuple[np.ndarray, float]:
    result = runge_approximate(op, u_omega0, t)
    rel = result.defect_norm / result.source_norm if result.source_norm > 0 else 0.0
    return result.coefficients, rel


def qhat_estimate(
    eta: Sequence[float],
    tau: float,
    lam: float,
    mode: Union[QhatMode, str],
    inputs: QhatInputs,
) -> QhatEstimate:
    """q̂(η) estimate with the recorded remainder |h^n Σ dq ρ|."""
    mode = QhatMode(mode)
    eta = np.asarray(eta, dtype=float)
    dq = inputs.dq
    geometry = dq.geometry
    if not np.any(dq.values):
        return QhatEstimate(eta, 0.0j, 0.0, float(tau), mode)
    torus = CgoTorus.around_omega0(geometry) if inputs.torus is None else inputs.torus
    pair = make_frequency_pair(eta, tau, lam)
    sol1: CgoSolution = solve_cgo(inputs.q1, pair.xi1, torus)
    sol2: CgoSolution = solve_cgo(inputs.q2, pair.xi2, torus)
    _, rho = cgo_product_remainder(sol1, sol2)
    dq_x = dq.values[torus.x_interior_index]
    remainder = float(abs(geometry.cell_volume * np.sum(dq_x * rho)))
    diagnostics = [sol1.diagnostics(), sol2.diagnostics()]
    if mode is QhatMode.ORACLE:
        value = pairing_interior(dq, sol1, sol2)
        return QhatEstimate(eta, value, remainder, float(tau), mode, diagnostics)

    if inputs.map_diff is None or inputs.runge1 is None or inputs.runge2 is None:
        raise ValueError("Data mode needs a map difference and two Runge operators")
    c1, defect1 = _relative_defect(inputs.runge1, sol1.on_omega0(), inputs.runge_threshold)
    c2, defect2 = _relative_defect(inputs.runge2, sol2.on_omega0(), inputs.runge_threshold)
    worst = max(defect1, defect2)
    if worst > inputs.max_defect:
        raise RungeDefectError(
            f"Runge defect {worst:.3e} above {inputs.max_defect:.3e} at η={eta.tolist()}, τ={tau:g}"
        )
    value = pairing_boundary(inputs.map_diff, c1, c2)
    return QhatEstimate(eta, value, remainder, float(tau), mode, diagnostics, [defect1, defect2])


def qhat_table(
    etas: np.ndarray,
    tau: float,
    lam: float,
    mode: Union[QhatMode, str],
    inputs: QhatInputs,
) -> List[QhatEstimate]:
    """One estimate per lattice frequency; conjugate frequencies reuse conj(q̂)."""
    done: Dict[Tuple[float, ...], QhatEstimate] = {}
    out = []
    for eta in np.asarray(etas, dtype=float):
        mirror = tuple(np.round(-eta, 12) + 0.0)
        if mirror in done:
            twin = done[mirror]
            estimate = QhatEstimate(eta, np.conj(twin.value), twin.remainder, twin.tau, twin.mode, twin.cgo, twin.runge_defects)
        else:
            estimate = qhat_estimate(eta, tau, lam, mode, inputs)
        done[tuple(np.round(eta, 12) + 0.0)] = estimate
        out.append(estimate)
    logger.info(f"q̂ table: {len(out)} frequencies, τ={tau:g}, mode={QhatMode(mode).value}")
    return out
