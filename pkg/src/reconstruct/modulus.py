"""
Triple-logarithmic modulus Φ_c, evaluated in log-space.

Φ_c(r) = 1/r for r ≤ 𝔢(c) = e^{e^{e^c}} and (log log log r)^{-2/(n+2)} above it.
The two branches do not meet at 𝔢(c) in general; the jump is kept as defined.
"""
import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ModulusSpec:
    c: float = 1.0
    n: int = 3

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ValueError("Modulus rate c must be positive")

    @property
    def exponent(self) -> float:
        return -2.0 / (self.n + 2)

    @property
    def log_log_branch_point(self) -> float:
        """log log 𝔢(c) = e^c."""
        return math.exp(self.c)


def log_frak_e(x: float) -> float:
    """log 𝔢(x) = e^{e^x}; inf once it leaves float range."""
    try:
        return math.exp(math.exp(x))
    except OverflowError:
        return math.inf


def triple_log(r: float) -> float:
    """L(r) = log log log r, defined for r > e^e."""
    return math.log(math.log(math.log(r)))


def phi_c_log(log_r: float, spec: ModulusSpec) -> float:
    """Φ_c at r = e^{log_r}; never forms r itself on the second branch."""
    if log_r <= 0.0:
        return math.exp(-log_r)
    log_log_r = math.log(log_r)
    if log_log_r <= spec.log_log_branch_point:
        return math.exp(-log_r)
    return math.log(log_log_r) ** spec.exponent


def phi_c(r: float, spec: ModulusSpec) -> float:
    if not r > 0:
        raise ValueError(f"Φ_c needs r > 0, got {r}")
    return phi_c_log(math.log(r), spec)


def on_triple_log_branch(log_r: float, spec: ModulusSpec) -> bool:
    return log_r > 0.0 and math.log(log_r) > spec.log_log_branch_point
