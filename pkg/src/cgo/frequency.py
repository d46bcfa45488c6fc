"""Complex frequency pairs ξ₁, ξ₂ with ξ_j·ξ_j = λ and ξ₁ + ξ₂ = η."""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.my_util.errors import FrequencyPairError

INVARIANT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FrequencyPair:
    eta: np.ndarray
    tau: float
    lam: float
    eta1: np.ndarray
    eta2: np.ndarray

    @property
    def xi1(self) -> np.ndarray:
        return (self.eta / 2.0 + self.eta1) + 1j * self.eta2

    @property
    def xi2(self) -> np.ndarray:
        return (self.eta / 2.0 - self.eta1) - 1j * self.eta2

    @property
    def imag_norm(self) -> float:
        return float(np.linalg.norm(self.eta2))

    def check(self, tol: float = INVARIANT_TOL) -> None:
        """Raise FrequencyPairError if any algebraic invariant fails."""
        scale = max(1.0, self.lam, self.tau**2, float(self.eta @ self.eta))
        checks = {
            "η₁·η₂": abs(self.eta1 @ self.eta2),
            "η₁·η": abs(self.eta1 @ self.eta),
            "η₂·η": abs(self.eta2 @ self.eta),
            "|η₁|² - (τ²+λ)": abs(self.eta1 @ self.eta1 - (self.tau**2 + self.lam)),
            "|η₂|² - (|η|²/4+τ²)": abs(self.eta2 @ self.eta2 - (self.eta @ self.eta / 4.0 + self.tau**2)),
            "ξ₁·ξ₁ - λ": abs(self.xi1 @ self.xi1 - self.lam),
            "ξ₂·ξ₂ - λ": abs(self.xi2 @ self.xi2 - self.lam),
            "|ξ₁+ξ₂-η|": float(np.max(np.abs(self.xi1 + self.xi2 - self.eta))),
        }
        failed = {name: value for name, value in checks.items() if value > tol * scale}
        if failed:
            raise FrequencyPairError(f"Frequency pair invariants violated: {failed}")


def _orthonormal_directions(eta: np.ndarray, hints: np.ndarray) -> np.ndarray:
    """Gram–Schmidt of the hint axes against η; keeps the first two survivors."""
    basis = []
    norm = np.linalg.norm(eta)
    if norm > 0:
        basis.append(eta / norm)
    found = []
    for axis in hints:
        v = np.asarray(axis, dtype=float).copy()
        for b in basis:
            v -= (v @ b) * b
        length = np.linalg.norm(v)
        if length > 1e-8:
            v /= length
            basis.append(v)
            found.append(v)
        if len(found) == 2:
            return np.array(found)
    raise FrequencyPairError(f"No plane perpendicular to η={eta.tolist()} spanned by the hint axes")


def make_frequency_pair(
    eta: Sequence[float],
    tau: float,
    lam: float,
    hints: Optional[np.ndarray] = None,
) -> FrequencyPair:
    """
    Build η₁ ⊥ η₂ ⊥ η with |η₁|² = τ² + λ and |η₂|² = |η|²/4 + τ².

    Directions come from Gram–Schmidt of the hint axes (default e₁, ..., eₙ)
    against η, so the orientation is deterministic.
    """
    eta = np.asarray(eta, dtype=float)
    n = eta.size
    if n < 3:
        raise FrequencyPairError(f"Frequency pairs need n ≥ 3, got n={n}")
    if tau < 1:
        raise FrequencyPairError(f"τ must be ≥ 1, got {tau}")
    if lam < 1:
        raise FrequencyPairError(f"λ must be ≥ 1, got {lam}")
    axes = np.eye(n) if hints is None else np.asarray(hints, dtype=float)
    d1, d2 = _orthonormal_directions(eta, axes)
    pair = FrequencyPair(
        eta=eta,
        tau=float(tau),
        lam=float(lam),
        eta1=np.sqrt(tau**2 + lam) * d1,
        eta2=np.sqrt(eta @ eta / 4.0 + tau**2) * d2,
    )
    pair.check()
    return pair
