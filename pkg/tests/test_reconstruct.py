import math

import numpy as np
import pytest

from src.cgo.faddeev import CgoTorus
from src.cgo.frequency import make_frequency_pair
from src.cgo.solver import solve_cgo
from src.domain.fields import Potential, interior_field
from src.domain.fourier import fourier_coefficient, fourier_transform, lowpass_lattice
from src.forward.helmholtz import ImpedanceParams, solve_dirichlet, solve_robin, zero_potential
from src.forward.maps import full_boundary_map, trace_basis
from src.my_util.errors import BasisMismatchError, ScheduleRangeError, SupportViolationError
from src.reconstruct.lowpass import lowpass_invert, tail_bound, tail_norm_bound
from src.reconstruct.modulus import ModulusSpec, log_frak_e, on_triple_log_branch, phi_c, phi_c_log
from src.reconstruct.pairing import pairing_boundary, pairing_interior
from src.reconstruct.qhat import QhatInputs, QhatMode, qhat_estimate, qhat_table
from src.reconstruct.schedule import ScheduleParams, schedule, select_tau, select_tau_residual
from src.runge.approximation import assemble_runge_operator, runge_approximate


def test_modulus_on_the_reciprocal_branch():
    assert phi_c(2.0, ModulusSpec()) == pytest.approx(0.5)
    assert phi_c(0.5, ModulusSpec()) == pytest.approx(2.0)
    assert not on_triple_log_branch(math.log(2.0), ModulusSpec())


def test_modulus_on_the_triple_log_branch():
    spec = ModulusSpec(c=0.5, n=3)
    log_r = math.exp(math.e)
    assert on_triple_log_branch(log_r, spec)
    assert phi_c_log(log_r, spec) == pytest.approx(1.0, rel=1e-12)


def test_modulus_never_overflows():
    spec = ModulusSpec()
    value = phi_c_log(1e300, spec)
    assert math.isfinite(value) and 0.0 < value < 1.0
    assert log_frak_e(1000.0) == math.inf


def test_modulus_is_nonincreasing_on_each_branch():
    spec = ModulusSpec(c=0.5)
    cut = math.exp(math.exp(spec.c))
    first = [phi_c_log(x, spec) for x in np.linspace(-5.0, cut * 0.999, 50)]
    second = [phi_c_log(x, spec) for x in np.geomspace(cut * 1.001, 1e300, 50)]
    assert np.all(np.diff(first) <= 0)
    assert np.all(np.diff(second) <= 0)


def test_modulus_rejects_bad_input():
    with pytest.raises(ValueError):
        phi_c(0.0, ModulusSpec())
    with pytest.raises(ValueError):
        ModulusSpec(c=0.0)


def test_schedule_at_unit_tau():
    filled = schedule(1.0, ScheduleParams(n=3, kappa=0.75))
    assert filled.s == pytest.approx(1.0)
    assert filled.eps == pytest.approx(math.exp(-3.0))
    assert filled.log_eps == pytest.approx(-3.0)


def test_schedule_growth_rates():
    filled = schedule(32.0, ScheduleParams(n=3, kappa=0.1))
    assert filled.s == pytest.approx(32.0**0.4)
    assert filled.eps == pytest.approx(32.0 ** (-16.0 / 5.0) * math.exp(-12.8))


def test_schedule_rejects_bad_parameters():
    with pytest.raises(ValueError):
        schedule(0.5, ScheduleParams())
    with pytest.raises(ScheduleRangeError):
        schedule(1.0, ScheduleParams(kappa=0.0))
    with pytest.raises(ValueError):
        ScheduleParams(theta=1.0)


def test_select_tau_branch_and_root():
    assert select_tau(1.0, 1.0) == 1.0
    tau = select_tau(1e-30, 1.0)
    assert tau > 1.0
    assert select_tau_residual(tau, 1e-30, 1.0) <= 1e-10


def test_select_tau_is_monotone_in_data_smallness():
    taus = [select_tau(c, 0.5) for c in (1e-10, 1e-50, 1e-200, 1e-300)]
    assert np.all(np.diff(taus) > 0)
    with pytest.raises(ValueError):
        select_tau(0.0, 1.0)


def test_interior_pairing_basics(pair):
    q1, q2 = pair
    geometry = q1.geometry
    dq = q1.difference(q2)
    ones = np.ones(geometry.interior_count)
    assert pairing_interior(dq, ones, ones) == pytest.approx(geometry.cell_volume * dq.values.sum())
    zero = q1.difference(q1)
    assert pairing_interior(zero, ones, ones) == 0.0


def test_interior_pairing_needs_omega0_support(geometry):
    dq = Potential.constant(geometry, 1.0).difference(zero_potential(geometry))
    ones = np.ones(geometry.interior_count)
    with pytest.raises(SupportViolationError):
        pairing_interior(dq, ones, ones)


def _full_boundary_pair(geometry):
    q1 = Potential(
        interior_field(geometry, 1.0 + 0.5 * geometry.omega0_mask * np.cos(geometry.interior_points[:, 0])),
        kappa=1.5,
    )
    q2 = Potential.constant(geometry, 1.0, kappa=1.5)
    return q1, q2


def test_boundary_pairing_matches_interior_pairing(full_boundary_geometry):
    geometry = full_boundary_geometry
    q1, q2 = _full_boundary_pair(geometry)
    everywhere = np.ones(geometry.boundary_count, dtype=bool)
    basis = trace_basis(geometry, everywhere, 10)
    diff = full_boundary_map(q1, 6.0, basis).difference(full_boundary_map(q2, 6.0, basis))
    eye = np.eye(basis.size)
    for a, b in [(0, 0), (1, 4), (7, 3)]:
        u1 = solve_dirichlet(q1, 6.0, phi=basis.synthesize(eye[a]))
        v2 = solve_dirichlet(q2, 6.0, phi=basis.synthesize(eye[b]))
        interior = pairing_interior(q1.difference(q2), u1, v2)
        boundary = pairing_boundary(diff, eye[a], eye[b])
        assert boundary == pytest.approx(interior, rel=1e-8, abs=1e-12)


def test_impedance_boundary_pairing_carries_minus_sign(full_boundary_geometry):
    geometry = full_boundary_geometry
    q1, q2 = _full_boundary_pair(geometry)
    params = ImpedanceParams.uniform(geometry)
    everywhere = np.ones(geometry.boundary_count, dtype=bool)
    basis = trace_basis(geometry, everywhere, 6)
    diff = full_boundary_map(q1, 6.0, basis, params).difference(full_boundary_map(q2, 6.0, basis, params))
    eye = np.eye(basis.size)
    u1 = solve_robin(q1, 6.0, params, phi=basis.synthesize(eye[2]), stencil="flux")
    v2 = solve_robin(q2, 6.0, params, phi=basis.synthesize(eye[5]), stencil="flux")
    interior = pairing_interior(q1.difference(q2), u1, v2)
    assert pairing_boundary(diff, eye[2], eye[5]) == pytest.approx(interior, rel=1e-8, abs=1e-12)


def test_boundary_pairing_checks_coefficients(full_boundary_geometry):
    geometry = full_boundary_geometry
    q1, q2 = _full_boundary_pair(geometry)
    basis = trace_basis(geometry, np.ones(geometry.boundary_count, dtype=bool), 4)
    diff = full_boundary_map(q1, 6.0, basis).difference(full_boundary_map(q2, 6.0, basis))
    with pytest.raises(BasisMismatchError):
        pairing_boundary(diff, np.ones(3), np.ones(4))
    outside = basis.synthesize(np.ones(4)).values + 1e-3 * np.arange(geometry.boundary_count)
    with pytest.raises(BasisMismatchError):
        pairing_boundary(diff, basis.synthesize(np.ones(4)).with_values(outside), np.ones(4))
    assert pairing_boundary(diff, basis.synthesize(np.eye(4)[1]), np.eye(4)[2]) == pytest.approx(
        pairing_boundary(diff, np.eye(4)[1], np.eye(4)[2])
    )


def test_lowpass_of_zero_samples(geometry):
    etas, _ = lowpass_lattice(geometry, 6.0)
    result = lowpass_invert(geometry, etas, np.zeros(len(etas)), 6.0, kappa=1.0)
    assert not np.any(result.field.values)
    assert result.modes == len(etas)


def test_lowpass_inverts_the_full_lattice(pair):
    dq = pair[0].difference(pair[1])
    geometry = dq.geometry
    radius = 10.0 * np.pi / geometry.h
    etas, indices = lowpass_lattice(geometry, radius)
    spectrum = fourier_transform(dq)
    samples = [spectrum[idx] for idx in map(tuple, indices)]
    result = lowpass_invert(geometry, etas, samples, radius)
    assert np.allclose(result.field.values, dq.values, atol=1e-10)
    assert result.tail_bound == math.inf


def test_tail_bound_formula(geometry):
    volume = geometry.cell_volume * int(geometry.omega0_mask.sum())
    assert tail_bound(geometry, 4.0, 2.0) == pytest.approx(4.0 * volume / 16.0)
    assert tail_norm_bound(geometry, 4.0, 2.0) == pytest.approx(2.0 * math.sqrt(volume) / 4.0)
    assert tail_bound(geometry, 0.0, 2.0) == math.inf
    etas, _ = lowpass_lattice(geometry, 4.0)
    result = lowpass_invert(geometry, etas, np.zeros(len(etas)), 4.0, kappa=2.0)
    assert result.tail_norm_bound**2 == pytest.approx(result.tail_bound)


def test_qhat_of_identical_potentials_is_zero(pair):
    q1, _ = pair
    estimate = qhat_estimate([0.0, 0.0, 0.0], 8.0, 10.0, QhatMode.ORACLE, QhatInputs(q1, q1))
    assert estimate.value == 0.0
    assert estimate.remainder == 0.0


def test_oracle_estimate_differs_from_coefficient_by_the_remainder(pair):
    q1, q2 = pair
    geometry = q1.geometry
    eta = np.array([2.0 * np.pi / geometry.torus_side, 0.0, 0.0])
    exact = fourier_coefficient(q1.difference(q2), eta)
    remainders = []
    for tau in (8.0, 32.0):
        estimate = qhat_estimate(eta, tau, 10.0, "oracle", QhatInputs(q1, q2))
        assert abs(estimate.value - exact) == pytest.approx(estimate.remainder, rel=1e-6, abs=1e-12)
        remainders.append(estimate.remainder)
    assert remainders[1] < remainders[0]


def test_qhat_table_reuses_conjugate_frequencies(pair):
    q1, q2 = pair
    step = 2.0 * np.pi / q1.geometry.torus_side
    etas = np.array([[step, 0.0, 0.0], [-step, 0.0, 0.0]])
    table = qhat_table(etas, 8.0, 10.0, QhatMode.ORACLE, QhatInputs(q1, q2))
    assert table[1].value == np.conj(table[0].value)
    assert np.array_equal(table[1].eta, etas[1])


def test_data_mode_uses_runge_approximants(full_boundary_geometry):
    geometry = full_boundary_geometry
    q1, q2 = _full_boundary_pair(geometry)
    basis = trace_basis(geometry, np.ones(geometry.boundary_count, dtype=bool), 24)
    diff = full_boundary_map(q1, 6.0, basis).difference(full_boundary_map(q2, 6.0, basis))
    inputs = QhatInputs(
        q1,
        q2,
        map_diff=diff,
        runge1=assemble_runge_operator(q1, 6.0, basis=basis),
        runge2=assemble_runge_operator(q2, 6.0, basis=basis),
    )
    estimate = qhat_estimate([0.0, 0.0, 0.0], 4.0, 6.0, QhatMode.DATA, inputs)
    assert np.isfinite(estimate.value)
    assert len(estimate.runge_defects) == 2
    assert all(0.0 <= d <= 1.0 + 1e-12 for d in estimate.runge_defects)
    with pytest.raises(ValueError):
        qhat_estimate([0.0, 0.0, 0.0], 4.0, 6.0, QhatMode.DATA, QhatInputs(q1, q2))


def test_data_estimate_matches_oracle_within_runge_defects(full_boundary_geometry):
    geometry = full_boundary_geometry
    q1, q2 = _full_boundary_pair(geometry)
    basis = trace_basis(geometry, np.ones(geometry.boundary_count, dtype=bool), 24)
    diff = full_boundary_map(q1, 6.0, basis).difference(full_boundary_map(q2, 6.0, basis))
    runge1 = assemble_runge_operator(q1, 6.0, basis=basis)
    runge2 = assemble_runge_operator(q2, 6.0, basis=basis)
    inputs = QhatInputs(q1, q2, map_diff=diff, runge1=runge1, runge2=runge2)
    torus = CgoTorus.around_omega0(geometry)
    dq_sup = float(np.max(np.abs(q1.difference(q2).values)))
    step = 2.0 * np.pi / geometry.torus_side
    for eta in ([0.0, 0.0, 0.0], [step, 0.0, 0.0]):
        data = qhat_estimate(eta, 4.0, 6.0, QhatMode.DATA, inputs)
        oracle = qhat_estimate(eta, 4.0, 6.0, QhatMode.ORACLE, inputs)
        frequencies = make_frequency_pair(np.asarray(eta), 4.0, 6.0)
        fits = [
            runge_approximate(op, solve_cgo(q, xi, torus).on_omega0(), 0.0)
            for op, q, xi in ((runge1, q1, frequencies.xi1), (runge2, q2, frequencies.xi2))
        ]
        d1, d2 = (fit.defect_norm for fit in fits)
        n1, n2 = (fit.source_norm for fit in fits)
        # dq(v1 v2 - u1 u2) with v = u - defect, integrated over Ω₀
        bound = dq_sup * (d1 * n2 + n1 * d2 + d1 * d2)
        assert abs(data.value - oracle.value) <= bound * (1.0 + 1e-6) + 1e-10 * n1 * n2
