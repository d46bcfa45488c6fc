"""Exception hierarchy shared by every lab module."""
from typing import Optional


class LabError(Exception):
    """Base class for all errors raised by the stability lab."""


class GeometryError(LabError):
    """Invalid grid geometry or patch selection."""


class UnsupportedExponentError(LabError, ValueError):
    """Sobolev exponent outside the supported set."""


class SupportViolationError(LabError):
    """A field has values outside the support an operation requires."""


class SpectralProximityError(LabError):
    """λ sits within the configured margin of a discrete eigenvalue."""

    def __init__(self, lam: float, eigenvalue: Optional[float], margin: float):
        self.lam = lam
        self.eigenvalue = eigenvalue
        self.margin = margin
        if eigenvalue is None:
            msg = f"λ={lam:g} is an eigenvalue of the discrete operator (singular factorization)"
        else:
            msg = (
                f"λ={lam:g} is within {abs(eigenvalue - lam):.3e} of the discrete "
                f"eigenvalue {eigenvalue:.12g} (margin {margin:.3e})"
            )
        super().__init__(msg)


class SingularSystemError(LabError):
    """A sparse factorization failed."""


class ThresholdError(LabError, ValueError):
    """λ below the admissible floor of a boundary value problem variant."""


class SpectralDivergenceError(LabError):
    """dist(λ, σ) fell below the divergence guard."""


class ConvergenceError(LabError):
    """An iterative method stopped without meeting its tolerance."""


class FrequencyPairError(LabError, ValueError):
    """The complex frequency pair cannot be built or fails its invariants."""


class LatticeResonanceError(LabError):
    """The Faddeev symbol nearly vanishes on the shifted dual lattice."""

    def __init__(self, min_symbol: float, guard: float):
        self.min_symbol = min_symbol
        self.guard = guard
        super().__init__(
            f"min |P_ξ(k)| = {min_symbol:.3e} below guard {guard:.1e}; "
            "try a different lattice shift or perturb τ"
        )


class ContractionFailureError(LabError):
    """The CGO fixed point diverged."""

    def __init__(self, imag_norm: float, lipschitz: float, iterations: int):
        self.imag_norm = imag_norm
        self.lipschitz = lipschitz
        self.iterations = iterations
        super().__init__(
            f"CGO fixed point diverged after {iterations} iterations at |Im ξ|={imag_norm:.4g} "
            f"(measured Lipschitz estimate {lipschitz:.4g})"
        )


class MismatchedPairError(LabError, ValueError):
    """Two CGO solutions do not come from one frequency pair."""


class BasisMismatchError(LabError, ValueError):
    """Boundary data expressed in a basis other than the map's input basis."""


class RungeDefectError(LabError):
    """The Runge approximation defect exceeds the allowed threshold."""


class ScheduleRangeError(LabError, ValueError):
    """The ε schedule left (0, 1)."""


class OffLatticeError(LabError, ValueError):
    """A frequency is not on the torus dual lattice."""
