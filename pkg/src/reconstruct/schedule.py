"""Parameter schedules s(τ), ε(τ) and the choice of τ from the data smallness 𝔠."""
import logging
import math
import sys
from dataclasses import dataclass, replace
from typing import Optional

from scipy import optimize

from src.my_util.errors import ScheduleRangeError
from src.reconstruct.modulus import log_frak_e

logger = logging.getLogger(__name__)

_FINITE_CAP = 1e300


@dataclass(frozen=True)
class ScheduleParams:
    n: int = 3
    kappa: float = 1.0
    c: float = 1.0
    theta: float = 0.5
    delta_interp: float = 2.5
    s: Optional[float] = None
    eps: Optional[float] = None
    tau: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"θ must lie in (0, 1), got {self.theta}")
        if self.kappa < 0:
            raise ValueError("ϰ must be nonnegative")

    @property
    def log_eps(self) -> Optional[float]:
        if self.tau is None:
            return None
        return -16.0 / (self.n + 2) * math.log(self.tau) - 4.0 * self.kappa * self.tau


def schedule(tau: float, spec: ScheduleParams) -> ScheduleParams:
    """Fill s = τ^{2/(n+2)} and ε = τ^{-16/(n+2)} e^{-4ϰτ}."""
    if tau < 1:
        raise ValueError(f"Schedule needs τ ≥ 1, got {tau}")
    n = spec.n
    s = tau ** (2.0 / (n + 2))
    log_eps = -16.0 / (n + 2) * math.log(tau) - 4.0 * spec.kappa * tau
    if log_eps >= 0.0:
        raise ScheduleRangeError(f"ε = {math.exp(log_eps):.4g} ≥ 1 at τ={tau:g}, ϰ={spec.kappa:g}")
    return replace(spec, s=s, eps=math.exp(log_eps), tau=float(tau))


def _root_function(tau: float, kappa: float, n: int, log_inv_c: float) -> float:
    value = 2.0 / (n + 2) * math.log(tau) + log_frak_e(kappa * tau) - log_inv_c
    return min(value, _FINITE_CAP)


def select_tau(frak_c: float, kappa: float, n: int = 3) -> float:
    """
    τ = 1 when 𝔢(ϰ)·𝔠 ≥ 1; otherwise the root of τ^{2/(n+2)}𝔢(ϰτ) = 1/𝔠.

    The root is found on log τ^{2/(n+2)} + log 𝔢(ϰτ) = log(1/𝔠), whose left side
    is strictly increasing.
    """
    if not frak_c > 0:
        raise ValueError(f"Data smallness 𝔠 must be positive, got {frak_c}")
    if kappa < 0:
        raise ValueError("ϰ must be nonnegative")
    log_inv_c = -math.log(frak_c)
    if log_frak_e(kappa) - log_inv_c >= 0.0:
        return 1.0
    hi = 2.0
    while _root_function(hi, kappa, n, log_inv_c) <= 0.0:
        hi *= 2.0
    tau = optimize.brentq(_root_function, 1.0, hi, args=(kappa, n, log_inv_c), xtol=1e-14, rtol=4 * sys.float_info.epsilon, maxiter=500)
    logger.debug(f"select_tau: 𝔠={frak_c:.3e}, ϰ={kappa:g} → τ={tau:.10g}")
    return float(tau)


def select_tau_residual(tau: float, frak_c: float, kappa: float, n: int = 3) -> float:
    """Relative log-space residual of the τ equation."""
    log_inv_c = -math.log(frak_c)
    return abs(_root_function(tau, kappa, n, log_inv_c)) / max(abs(log_inv_c), 1.0)
