import numpy as np
import pytest

from src.domain.fields import interior_field
from src.forward.helmholtz import ImpedanceParams
from src.runge.approximation import (
    assemble_runge_operator,
    global_approximant,
    runge_approximate,
    runge_tradeoff_curve,
    threshold_schedule,
    threshold_schedule_log,
)


@pytest.fixture
def runge_op(pair):
    return assemble_runge_operator(pair[0], 6.0, basis_size=12)


@pytest.fixture
def source(runge_op, rng):
    size = int(runge_op.geometry.omega0_mask.sum())
    return rng.standard_normal(size) + 1j * rng.standard_normal(size)


def _gram(op):
    return op.geometry.cell_volume * op.left.conj().T @ op.left


def test_single_basis_function(pair):
    op = assemble_runge_operator(pair[0], 6.0, basis_size=1)
    assert op.singular_values.shape == (1,)
    assert op.l2_norm(op.left[:, 0]) == pytest.approx(1.0, rel=1e-12)


def test_left_vectors_are_orthonormal(runge_op):
    assert np.allclose(_gram(runge_op), np.eye(runge_op.singular_values.size), atol=1e-10)
    assert np.all(np.diff(runge_op.singular_values) <= 0)


def test_operator_maps_right_vectors_to_scaled_left_vectors(runge_op):
    for j, tau in enumerate(runge_op.singular_values):
        image = runge_op.apply(runge_op.right[:, j])
        assert np.allclose(image, tau * runge_op.left[:, j], atol=1e-10 * max(tau, 1.0))
        assert runge_op.datum_norm(runge_op.right[:, j]) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("fraction", [1e-3, 0.01, 0.3])
def test_datum_bound_and_orthogonal_defect(runge_op, source, fraction):
    t = fraction * runge_op.singular_values[0]
    result = runge_approximate(runge_op, source, t)
    result.check()
    assert result.datum_norm * t <= result.source_norm * (1.0 + 1e-10)
    overlap = runge_op.inner(result.defect, result.approximant)
    assert abs(overlap) <= 1e-8 * result.source_norm**2
    assert result.datum_norm == pytest.approx(runge_op.datum_norm(result.coefficients), rel=1e-8)


def test_large_threshold_keeps_nothing(runge_op, source):
    result = runge_approximate(runge_op, source, 2.0 * runge_op.singular_values[0])
    assert result.kept_modes == 0
    assert not np.any(result.coefficients)
    assert np.allclose(result.defect, source)
    assert result.defect_norm == pytest.approx(result.source_norm)


def test_negative_threshold_rejected(runge_op, source):
    with pytest.raises(ValueError):
        runge_approximate(runge_op, source, -1.0)


def test_interior_field_source_is_restricted(runge_op, source):
    geometry = runge_op.geometry
    values = np.zeros(geometry.interior_count, dtype=complex)
    values[geometry.omega0_mask] = source
    from_field = runge_approximate(runge_op, interior_field(geometry, values), 0.0)
    from_array = runge_approximate(runge_op, source, 0.0)
    assert np.array_equal(from_field.coefficients, from_array.coefficients)


def test_tradeoff_curve_is_monotone(runge_op, source):
    ts = np.geomspace(2.0 * runge_op.singular_values[0], 0.5 * runge_op.singular_values[-1], 10)
    points = runge_tradeoff_curve(runge_op, source, ts)
    defects = [p.defect_norm for p in points]
    data = [p.datum_norm for p in points]
    assert np.all(np.diff(defects) <= 1e-8 * defects[0])
    assert np.all(np.diff(data) >= -1e-8 * data[-1])
    assert [p.kept_modes for p in points][-1] == runge_op.singular_values.size


def test_global_approximant_matches_restriction(runge_op, source):
    result = runge_approximate(runge_op, source, 0.1 * runge_op.singular_values[0], with_global=True)
    v = global_approximant(runge_op, result)
    assert np.allclose(v.values[runge_op.geometry.omega0_mask], result.approximant, atol=1e-10)
    assert result.global_norm is not None and result.global_norm > 0


def test_impedance_runge_operator(pair):
    params = ImpedanceParams.uniform(pair[0].geometry)
    op = assemble_runge_operator(pair[0], 6.0, basis_size=6, params=params)
    assert op.is_impedance
    assert np.allclose(_gram(op), np.eye(6), atol=1e-10)
    assert np.allclose(op.weights, (1.0 + op.basis.mu) ** 0.5)


def test_threshold_schedule():
    assert threshold_schedule_log(1.0, 0.5) == pytest.approx(-4.0 * np.exp(0.5))
    assert threshold_schedule(0.25, 0.5) == pytest.approx(0.5 * np.exp(-4.0 * np.exp(2.0)))
    assert threshold_schedule(1e-3, 1.0) == 0.0
    with pytest.raises(ValueError):
        threshold_schedule(0.0, 1.0)
