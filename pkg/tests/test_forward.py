import numpy as np
import pytest
import scipy.linalg as sla

from src.domain.fields import Potential, boundary_field, interior_field
from src.domain.norms import normal_derivative, sobolev_interior_norm
from src.forward.helmholtz import (
    ImpedanceParams,
    LruCache,
    helmholtz_operator,
    robin_operator,
    solve_dirichlet,
    solve_robin,
    zero_potential,
)
from src.forward.maps import (
    BoundaryMap,
    assemble_dtn,
    assemble_rtd,
    full_boundary_map,
    operator_norm,
    trace_basis,
)
from src.my_util.errors import BasisMismatchError, SpectralProximityError, ThresholdError
from src.spectral.eigen import dense_spectrum
from tests.conftest import make_geometry


def manufactured_error(subdivisions: int, q_value: float = 1.0, lam: float = 10.0) -> float:
    geometry = make_geometry(subdivisions)
    q = Potential.constant(geometry, q_value)

    def exact(x):
        return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]) * np.sin(np.pi * x[:, 2]) + x[:, 0] * x[:, 1]

    x = geometry.interior_points
    bump = np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]) * np.sin(np.pi * x[:, 2])
    f = (3.0 * np.pi**2) * bump + (q_value - lam) * exact(x)
    u = solve_dirichlet(
        q,
        lam,
        f=interior_field(geometry, f),
        phi=boundary_field(geometry, exact(geometry.boundary_points)),
    )
    error = u.with_values(u.values - exact(x), trace=None)
    return sobolev_interior_norm(error, 0)


@pytest.mark.slow
def test_manufactured_solution_converges_at_second_order():
    coarse = manufactured_error(16)
    fine = manufactured_error(32)
    assert np.log2(coarse / fine) >= 1.9


def test_zero_data_gives_zero_solution(geometry):
    u = solve_dirichlet(zero_potential(geometry), 0.0)
    assert not np.any(u.values)
    assert not np.any(u.trace)


def test_linear_function_is_reproduced_exactly(geometry):
    phi = boundary_field(geometry, geometry.boundary_points[:, 0])
    u = solve_dirichlet(zero_potential(geometry), 0.0, phi=phi)
    assert np.allclose(u.values, geometry.interior_points[:, 0], atol=1e-12)
    assert np.array_equal(u.trace, phi.values)


def test_solution_is_linear_in_data(pair, rng):
    q1, _ = pair
    geometry = q1.geometry
    f1, f2 = rng.standard_normal((2, geometry.interior_count))
    p1, p2 = rng.standard_normal((2, geometry.boundary_count))
    alpha = -1.7
    u1 = solve_dirichlet(q1, 5.0, interior_field(geometry, f1), boundary_field(geometry, p1))
    u2 = solve_dirichlet(q1, 5.0, interior_field(geometry, f2), boundary_field(geometry, p2))
    combined = solve_dirichlet(
        q1, 5.0, interior_field(geometry, alpha * f1 + f2), boundary_field(geometry, alpha * p1 + p2)
    )
    assert np.allclose(combined.values, alpha * u1.values + u2.values, atol=1e-10)


def test_residual_is_small(pair, rng):
    q1, _ = pair
    geometry = q1.geometry
    f = rng.standard_normal(geometry.interior_count)
    u = solve_dirichlet(q1, 7.0, f=interior_field(geometry, f))
    assert helmholtz_operator(q1, 7.0).residual(u, f) <= 1e-8 * np.linalg.norm(f)


def test_eigenvalue_hit_raises_spectral_proximity():
    geometry = make_geometry(4, inner_side=0.0)
    q = zero_potential(geometry)
    eigenvalue = float(dense_spectrum(q)[0])
    with pytest.raises(SpectralProximityError):
        solve_dirichlet(q, eigenvalue)


def test_dtn_difference_vanishes_for_equal_potentials(pair):
    q1, _ = pair
    basis = trace_basis(q1.geometry, size=8)
    first = assemble_dtn(q1, 6.0, basis=basis)
    second = assemble_dtn(q1, 6.0, basis=basis)
    diff = first.difference(second)
    assert not np.any(diff.matrix)
    assert operator_norm(diff) == 0.0


def test_full_boundary_dtn_is_symmetric(full_boundary_geometry):
    q = Potential.constant(full_boundary_geometry, 1.0)
    everywhere = np.ones(full_boundary_geometry.boundary_count, dtype=bool)
    basis = trace_basis(full_boundary_geometry, everywhere, 40)
    dtn = full_boundary_map(q, 6.0, basis)
    gram = full_boundary_geometry.face_area * basis.vectors.T @ dtn.matrix
    assert np.max(np.abs(gram - gram.T)) <= 1e-6 * np.max(np.abs(gram))


def test_dtn_columns_match_single_solves():
    geometry = make_geometry(6)
    q = Potential.constant(geometry, 0.5)
    basis = trace_basis(geometry, size=5)
    dtn = assemble_dtn(q, 3.0, basis=basis, weighted=False)
    for j in range(basis.size):
        u = solve_dirichlet(q, 3.0, phi=boundary_field(geometry, basis.vectors[:, j].copy()))
        column = normal_derivative(u).values[geometry.sigma_mask]
        assert np.array_equal(dtn.matrix[:, j], column)


def test_dtn_carries_sobolev_weights(pair):
    dtn = assemble_dtn(pair[0], 6.0, basis_size=6)
    assert (dtn.s_in, dtn.s_out) == (1.5, 0.5)
    assert dtn.weight_in.shape == (6, 6)
    assert dtn.weight_out.shape == (int(pair[0].geometry.sigma_mask.sum()),) * 2


def test_maps_with_different_bases_cannot_be_subtracted(pair):
    q1, q2 = pair
    first = assemble_dtn(q1, 6.0, basis_size=4)
    second = assemble_dtn(q2, 6.0, basis_size=5)
    with pytest.raises(BasisMismatchError):
        first.difference(second)


def test_operator_norm_trivial_maps():
    assert operator_norm(BoundaryMap.from_matrix(np.zeros((3, 3)))) == 0.0
    assert operator_norm(BoundaryMap.from_matrix(np.diag([3.0, 1.0]))) == pytest.approx(3.0)


def test_operator_norm_matches_dense_svd(rng):
    matrix = rng.standard_normal((20, 20))
    a = rng.standard_normal((20, 20))
    b = rng.standard_normal((20, 20))
    w_in = a @ a.T + 20.0 * np.eye(20)
    w_out = b @ b.T + 20.0 * np.eye(20)
    weighted = np.real(sla.sqrtm(w_out)) @ matrix @ np.linalg.inv(np.real(sla.sqrtm(w_in)))
    expected = np.linalg.svd(weighted, compute_uv=False)[0]
    assert operator_norm(BoundaryMap.from_matrix(matrix, w_in, w_out)) == pytest.approx(expected, rel=1e-10)


def test_operator_norm_invariant_under_input_rotation(rng):
    matrix = rng.standard_normal((12, 8))
    rotation, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    assert operator_norm(BoundaryMap.from_matrix(matrix @ rotation)) == pytest.approx(
        operator_norm(BoundaryMap.from_matrix(matrix)), rel=1e-12
    )


def test_map_export_writes_bundle(pair, tmp_path):
    dtn = assemble_dtn(pair[0], 6.0, basis_size=4)
    json_path = dtn.export(tmp_path / "dtn")
    assert json_path.exists()
    assert json_path.with_suffix(".bin").stat().st_size == dtn.matrix.size * 8


def test_robin_zero_data_gives_zero_solution(geometry):
    params = ImpedanceParams.uniform(geometry)
    u = solve_robin(zero_potential(geometry), 4.0, params)
    assert not np.any(u.values)
    assert not np.any(u.trace)


@pytest.mark.parametrize("stencil", ["flux", "second_order"])
def test_robin_recovers_manufactured_discrete_solution(geometry, stencil):
    q = zero_potential(geometry)
    params = ImpedanceParams.uniform(geometry, a=1.0)
    op = robin_operator(q, 4.0, params, stencil)
    x = geometry.interior_points
    exact_u = np.cos(x[:, 0]) * np.exp(x[:, 1]) + 1j * x[:, 2]
    pts = geometry.boundary_points
    exact_trace = np.cos(pts[:, 0]) * np.exp(pts[:, 1]) + 1j * pts[:, 2]
    rhs = op.matrix @ np.concatenate([exact_u, exact_trace])
    nI = geometry.interior_count
    u = solve_robin(q, 4.0, params, interior_field(geometry, rhs[:nI]), boundary_field(geometry, rhs[nI:]), stencil)
    assert np.allclose(u.values, exact_u, atol=1e-8)
    assert np.allclose(u.trace, exact_trace, atol=1e-8)
    interior, boundary = op.residuals(u, rhs[:nI], rhs[nI:])
    assert interior <= 1e-8 * np.linalg.norm(rhs) and boundary <= 1e-8 * np.linalg.norm(rhs)


def test_robin_below_threshold_is_rejected(geometry):
    params = ImpedanceParams.uniform(geometry, lam0=5.0)
    with pytest.raises(ThresholdError):
        solve_robin(zero_potential(geometry), 2.0, params)


def test_impedance_coefficient_must_be_positive(geometry):
    with pytest.raises(ValueError):
        ImpedanceParams(np.zeros(geometry.boundary_count))


def test_rtd_columns_match_single_solves(pair):
    q1, q2 = pair
    geometry = q1.geometry
    params = ImpedanceParams.uniform(geometry)
    basis = trace_basis(geometry, size=4)
    rtd = assemble_rtd(q1, 4.0, params, basis=basis)
    assert (rtd.s_in, rtd.s_out) == (0.5, 1.5)
    for j in range(basis.size):
        u = solve_robin(q1, 4.0, params, phi=boundary_field(geometry, basis.vectors[:, j].copy()))
        assert np.array_equal(rtd.matrix[:, j], u.trace[geometry.sigma_mask])
    same = assemble_rtd(q2, 4.0, params, basis=basis).difference(assemble_rtd(q2, 4.0, params, basis=basis))
    assert not np.any(same.matrix)


def test_operator_cache_is_keyed_on_geometry():
    unit = make_geometry(6)
    wide = make_geometry(6, side=2.0)
    first = helmholtz_operator(zero_potential(unit), 6.0)
    second = helmholtz_operator(zero_potential(wide), 6.0)
    assert first is not second
    assert second.geometry is wide
    assert helmholtz_operator(zero_potential(make_geometry(6)), 6.0) is first


def test_lru_cache_evicts_oldest_entry():
    cache = LruCache(capacity=2)
    builds = []

    def build(key):
        builds.append(key)
        return key

    for key in ("a", "b", "a", "c", "b"):
        cache.get((key,), lambda key=key: build(key))
    assert builds == ["a", "b", "c", "b"]


def test_partial_dtn_uses_one_sided_stencil_by_default(pair):
    q1 = pair[0]
    basis = trace_basis(q1.geometry, size=4)
    default = assemble_dtn(q1, 6.0, basis=basis, weighted=False)
    second = assemble_dtn(q1, 6.0, basis=basis, stencil_order=2, weighted=False)
    flux = assemble_dtn(q1, 6.0, basis=basis, stencil_order=1, weighted=False)
    assert np.array_equal(default.matrix, second.matrix)
    assert not np.allclose(default.matrix, flux.matrix)
