"""
Sparse finite-difference Helmholtz operators on the box.

HelmholtzOperator factors A = -Δ_h + q - λ with Dirichlet rows eliminated;
RobinOperator factors the coupled interior/boundary system of the impedance
problem (∂_ν ∓ ia√λ)u = φ. Each owns one SuperLU factorization that serves every
solve against it.
"""
import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Callable, Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from src.domain.fields import GridField, Potential, Support, interior_field
from src.domain.geometry import Geometry
from src.my_util import fingerprint
from src.my_util.errors import SingularSystemError, SpectralProximityError, ThresholdError

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 1e-6
DENSE_LIMIT = 400
RESIDUAL_TOL = 1e-8
FLUX_STENCIL = "flux"
DEFAULT_ROBIN_STENCIL = "second_order"
ROBIN_STENCILS = (FLUX_STENCIL, "second_order")


def dirichlet_laplacian(geometry: Geometry) -> sp.csr_matrix:
    """-Δ_h on interior nodes (lexicographic order) with Dirichlet rows eliminated."""
    m = geometry.N - 1
    h2 = geometry.h**2
    tri = sp.diags([-np.ones(m - 1), 2.0 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1]) / h2
    eye = sp.identity(m, format="csr")
    total = sp.csr_matrix((m**geometry.n, m**geometry.n))
    for axis in range(geometry.n):
        factor = sp.identity(1, format="csr")
        for d in range(geometry.n):
            factor = sp.kron(factor, tri if d == axis else eye, format="csr")
        total = total + factor
    return total.tocsr()


def boundary_coupling(geometry: Geometry) -> sp.csr_matrix:
    """C with (-Δ_h u)_I = L u_I - C u_B; one 1/h² entry per boundary node."""
    return sp.csr_matrix(
        (
            np.full(geometry.boundary_count, 1.0 / geometry.h**2),
            (geometry.boundary_inner1, np.arange(geometry.boundary_count)),
        ),
        shape=(geometry.interior_count, geometry.boundary_count),
    )


def _factor(matrix: sp.spmatrix, lam: float, margin: float) -> spla.SuperLU:
    try:
        return spla.splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:
        if "singular" in str(exc).lower():
            raise SpectralProximityError(lam, None, margin) from exc
        raise SingularSystemError(str(exc)) from exc


def _solve_real_split(lu: spla.SuperLU, rhs: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(rhs):
        return lu.solve(np.ascontiguousarray(rhs.real)) + 1j * lu.solve(np.ascontiguousarray(rhs.imag))
    return lu.solve(np.ascontiguousarray(rhs, dtype=float))


class HelmholtzOperator:
    """Factored Dirichlet operator for one (q, λ)."""

    def __init__(
        self,
        potential: Potential,
        lam: float,
        margin: float = DEFAULT_MARGIN,
        check_spectrum: bool = True,
    ):
        self.potential = potential
        self.geometry = potential.geometry
        self.lam = float(lam)
        self.margin = margin * max(abs(self.lam), 1.0)
        self.stiffness = (dirichlet_laplacian(self.geometry) + sp.diags(potential.values)).tocsr()
        self.matrix = (self.stiffness - self.lam * sp.identity(self.geometry.interior_count)).tocsc()
        self.coupling = boundary_coupling(self.geometry)
        self.lu = _factor(self.matrix, self.lam, self.margin)
        self.nearest_eigenvalue: Optional[float] = None
        if check_spectrum:
            self.nearest_eigenvalue = self._nearest_eigenvalue()
            if abs(self.nearest_eigenvalue - self.lam) < self.margin:
                raise SpectralProximityError(self.lam, self.nearest_eigenvalue, self.margin)
        logger.debug(
            f"Factored Dirichlet operator: {self.geometry.interior_count} unknowns, λ={self.lam:g}, "
            f"nearest eigenvalue {self.nearest_eigenvalue}"
        )

    def _nearest_eigenvalue(self) -> float:
        size = self.geometry.interior_count
        if size <= DENSE_LIMIT:
            eigs = sla.eigvalsh(self.stiffness.toarray())
            return float(eigs[np.argmin(np.abs(eigs - self.lam))])
        inverse = spla.LinearOperator((size, size), matvec=self.lu.solve, dtype=float)
        vals = spla.eigsh(
            self.stiffness, k=1, sigma=self.lam, OPinv=inverse, which="LM", return_eigenvectors=False
        )
        return float(vals[0])

    def rhs(self, f: Optional[np.ndarray], phi: Optional[np.ndarray]) -> np.ndarray:
        size = self.geometry.interior_count
        out: np.ndarray = np.zeros(size)
        if phi is not None:
            out = self.coupling @ phi
        if f is not None:
            out = out + f
        return out

    def solve(self, f: Optional[np.ndarray] = None, phi: Optional[np.ndarray] = None) -> np.ndarray:
        rhs = self.rhs(f, phi)
        u = _solve_real_split(self.lu, rhs)
        scale = np.linalg.norm(rhs)
        if scale > 0:
            residual = np.linalg.norm(self.matrix @ u - rhs) / scale
            if residual > RESIDUAL_TOL:
                raise SingularSystemError(f"Dirichlet solve residual {residual:.3e} above {RESIDUAL_TOL:.0e}")
        return u

    def residual(self, u: GridField, f: Optional[np.ndarray] = None) -> float:
        """‖(-Δ_h + q - λ)u - f‖ with the trace of u as boundary data."""
        applied = self.matrix @ u.values - (self.coupling @ u.trace if u.trace is not None else 0.0)
        target = 0.0 if f is None else f
        return float(np.linalg.norm(applied - target))


@dataclass(frozen=True)
class ImpedanceParams:
    """Boundary coefficient a > 0, sign branch (+1 for ∂_ν - ia√λ) and threshold λ₀."""

    a: np.ndarray
    sign: int = 1
    lam0: float = 1.0

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=float).ravel()
        if a.size == 0 or np.any(a <= 0):
            raise ValueError("Impedance coefficient a must be strictly positive on every boundary node")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        object.__setattr__(self, "a", a)

    @classmethod
    def uniform(cls, geometry: Geometry, a: float = 1.0, sign: int = 1, lam0: float = 1.0) -> "ImpedanceParams":
        return cls(np.full(geometry.boundary_count, float(a)), sign, lam0)


class RobinOperator:
    """Factored impedance operator; unknowns are interior values followed by the trace."""

    def __init__(self, potential: Potential, lam: float, params: ImpedanceParams, stencil: str = DEFAULT_ROBIN_STENCIL):
        geometry = potential.geometry
        if params.a.size != geometry.boundary_count:
            raise ValueError(f"a needs {geometry.boundary_count} values, got {params.a.size}")
        if lam < params.lam0:
            raise ThresholdError(f"λ={lam:g} below impedance threshold λ₀={params.lam0:g}")
        self.potential = potential
        self.geometry = geometry
        self.lam = float(lam)
        self.params = params
        self.stencil = stencil
        nI, nB = geometry.interior_count, geometry.boundary_count
        h = geometry.h
        interior = (dirichlet_laplacian(geometry) + sp.diags(potential.values) - self.lam * sp.identity(nI)).tocsr()
        coupling = boundary_coupling(geometry)
        rows = np.arange(nB)
        impedance = 1j * params.sign * params.a * np.sqrt(self.lam)
        if stencil == FLUX_STENCIL:
            bb = sp.diags(1.0 / h - impedance)
            bi = sp.csr_matrix((np.full(nB, -1.0 / h), (rows, geometry.boundary_inner1)), shape=(nB, nI))
        elif stencil == "second_order":
            bb = sp.diags(1.5 / h - impedance)
            bi = sp.csr_matrix(
                (
                    np.concatenate([np.full(nB, -2.0 / h), np.full(nB, 0.5 / h)]),
                    (np.concatenate([rows, rows]), np.concatenate([geometry.boundary_inner1, geometry.boundary_inner2])),
                ),
                shape=(nB, nI),
            )
        else:
            raise ValueError(f"Unknown Robin stencil '{stencil}'")
        self.matrix = sp.bmat([[interior, -coupling], [bi, bb]], format="csc").astype(complex)
        try:
            self.lu = spla.splu(self.matrix)
        except RuntimeError as exc:
            raise SingularSystemError(f"Robin system singular at λ={self.lam:g}: {exc}") from exc
        logger.debug(f"Factored Robin operator: {nI}+{nB} unknowns, λ={self.lam:g}, sign={params.sign:+d}")

    def solve(self, f: Optional[np.ndarray] = None, phi: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        nI, nB = self.geometry.interior_count, self.geometry.boundary_count
        rhs = np.zeros(nI + nB, dtype=complex)
        if f is not None:
            rhs[:nI] = f
        if phi is not None:
            rhs[nI:] = phi
        x = self.lu.solve(rhs)
        scale = np.linalg.norm(rhs)
        if scale > 0:
            residual = np.linalg.norm(self.matrix @ x - rhs) / scale
            if residual > RESIDUAL_TOL:
                raise SingularSystemError(f"Robin solve residual {residual:.3e} above {RESIDUAL_TOL:.0e}")
        return x[:nI], x[nI:]

    def residuals(self, u: GridField, f: Optional[np.ndarray] = None, phi: Optional[np.ndarray] = None) -> Tuple[float, float]:
        """Interior and boundary-condition residual norms of a candidate solution."""
        nI = self.geometry.interior_count
        x = np.concatenate([u.values, u.trace if u.trace is not None else np.zeros(self.geometry.boundary_count)])
        applied = self.matrix @ x
        f_vec = np.zeros(nI) if f is None else f
        phi_vec = np.zeros(self.geometry.boundary_count) if phi is None else phi
        return float(np.linalg.norm(applied[:nI] - f_vec)), float(np.linalg.norm(applied[nI:] - phi_vec))


class LruCache:
    """Small thread-safe LRU keyed by (kind, geometry key, potential fingerprint, λ, extras)."""

    def __init__(self, capacity: int = 8):
        self.capacity = capacity
        self._items: "OrderedDict[tuple, Any]" = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key: tuple, build: Callable[[], Any]) -> Any:
        with self._lock:
            if key in self._items:
                self._items.move_to_end(key)
                return self._items[key]
        value = build()
        with self._lock:
            self._items[key] = value
            while len(self._items) > self.capacity:
                self._items.popitem(last=False)
        return value

    def clear(self) -> None:
        with self._lock:
            self._items.clear()


_CACHE = LruCache()


def helmholtz_operator(potential: Potential, lam: float, margin: float = DEFAULT_MARGIN) -> HelmholtzOperator:
    key = ("dirichlet", potential.geometry.cache_key, potential.fingerprint, float(lam), margin)
    return _CACHE.get(key, lambda: HelmholtzOperator(potential, lam, margin))


def robin_operator(potential: Potential, lam: float, params: ImpedanceParams, stencil: str = DEFAULT_ROBIN_STENCIL) -> RobinOperator:
    key = ("robin", potential.geometry.cache_key, potential.fingerprint, float(lam), fingerprint(params.a), params.sign, stencil)
    return _CACHE.get(key, lambda: RobinOperator(potential, lam, params, stencil))


def clear_operator_cache() -> None:
    _CACHE.clear()


def solve_dirichlet(
    q: Potential,
    lam: float,
    f: Optional[GridField] = None,
    phi: Optional[GridField] = None,
    margin: float = DEFAULT_MARGIN,
) -> GridField:
    """Solve (-Δ_h + q - λ)u = f in Ω, u = φ on ∂Ω. The trace is φ exactly."""
    operator = helmholtz_operator(q, lam, margin)
    f_vals = None if f is None else f.values
    phi_vals = None if phi is None else phi.values
    u = operator.solve(f_vals, phi_vals)
    trace = np.zeros(q.geometry.boundary_count, dtype=u.dtype) if phi is None else np.asarray(phi.values)
    return GridField(q.geometry, u, Support.INTERIOR, trace=trace, name="u")


def solve_robin(
    q: Potential,
    lam: float,
    params: ImpedanceParams,
    f: Optional[GridField] = None,
    phi: Optional[GridField] = None,
    stencil: str = DEFAULT_ROBIN_STENCIL,
) -> GridField:
    """Solve (-Δ_h + q - λ)u = f in Ω, (∂_ν ∓ ia√λ)u = φ on ∂Ω."""
    operator = robin_operator(q, lam, params, stencil)
    u, trace = operator.solve(None if f is None else f.values, None if phi is None else phi.values)
    return GridField(q.geometry, u, Support.INTERIOR, trace=trace, name="u")


def zero_potential(geometry: Geometry) -> Potential:
    return Potential(interior_field(geometry, np.zeros(geometry.interior_count), name="q0"), 0.0)
