import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.domain.fourier import fourier_coefficient, lowpass_lattice
from src.domain.norms import sobolev_interior_norm
from src.harness.config import (
    ExperimentConfig,
    PotentialPairSpec,
    QhatModeName,
    load_experiment_config,
)
from src.harness.experiment_manager import (
    StabilityExperimentManager,
    run_impedance_experiment,
    run_stability_experiment,
)
from src.harness.fitting import Coordinates, fit_scaling, triple_log_coordinate
from src.harness.records import (
    CSV_COLUMNS,
    STATUS_DEGENERATE,
    STATUS_FAILED,
    STATUS_OK,
    StabilityRecord,
    read_records_csv,
    write_records_csv,
)
from src.harness.stages import run_cgo_stage, run_dtn_stage, run_forward_stage, run_reconstruct_stage, run_runge_stage
from src.my_util.errors import SupportViolationError
from src.my_util.my_io import read_array_bundle, read_csv, write_array_bundle, write_csv
from src.reconstruct.lowpass import lowpass_invert
from src.reconstruct.qhat import QhatInputs, QhatMode, qhat_table
from src.spectral.eigen import dense_spectrum
from src.spectral.weights import b_lambda


def tiny_config(tmp_path, **updates) -> ExperimentConfig:
    data = {
        "name": "tiny",
        "geometry": {"subdivisions": 8},
        "potentials": {"background": 0.0, "amplitude": 0.5},
        "lambdas": [6.0],
        "taus": [8.0, 16.0],
        "levels": [0.0, 1e-2, 1.0],
        "basis_size": 6,
        "full_basis_size": 12,
        "qhat_mode": "oracle",
        "schedule": {"s_override": 4.5},
        "threads": 2,
        "output": {"directory": str(tmp_path)},
    }
    data.update(updates)
    return ExperimentConfig.model_validate(data)


# ---------------------------------------------------------------- configuration


def test_default_config_loads():
    config = load_experiment_config()
    assert config.name == "dirichlet_stability"
    assert config.qhat_mode is QhatModeName.DATA
    assert config.levels[0] == 0.0
    assert config.geometry.gamma.faces == ["x1=0"]
    assert config.dtn_stencil_order == 2
    assert config.impedance.stencil == "second_order"


def test_environment_and_explicit_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("LAB_SEED", "7")
    monkeypatch.setenv("LAB_QHAT_MODE", "oracle")
    monkeypatch.setenv("LAB_OUTPUT_DIR", str(tmp_path))
    config = load_experiment_config()
    assert config.seed == 7
    assert config.qhat_mode is QhatModeName.ORACLE
    assert config.output.directory == str(tmp_path)
    explicit = load_experiment_config(overrides={"seed": 9, "threads": None, "output_dir": tmp_path / "x"})
    assert explicit.seed == 9
    assert explicit.threads == 2
    assert explicit.output.directory == str(tmp_path / "x")


def test_json_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"name": "json_run", "lambdas": [4.0, 9.0], "variant": "impedance"}))
    config = load_experiment_config(path)
    assert config.name == "json_run"
    assert config.lambdas == [4.0, 9.0]
    assert config.variant.value == "impedance"


@pytest.mark.parametrize(
    "data",
    [
        {"lambdas": [0.5]},
        {"variant": "impedance", "impedance": {"lam0": 5.0}, "lambdas": [4.0]},
        {"schedule": {"theta": 1.5}},
        {"levels": [-1.0]},
        {"basis_size": 0},
        {"impedance": {"sign": 2}},
        {"impedance": {"stencil": "upwind"}},
        {"dtn_stencil_order": 3},
    ],
)
def test_invalid_configs_rejected(data):
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(data)


def test_potential_pair_spec(geometry):
    q1, q2 = PotentialPairSpec(background=1.0, amplitude=0.5).build(geometry)
    assert q1.kappa == q2.kappa == pytest.approx(1.5)
    assert np.all(q2.values == 1.0)
    same1, same2 = PotentialPairSpec(identical=True).build(geometry)
    assert same1 is same2
    with pytest.raises(SupportViolationError):
        PotentialPairSpec(radius=0.45).build(geometry)


# ---------------------------------------------------------------- records and fits


def test_record_csv_is_deterministic_and_skips_timings(tmp_path):
    first = StabilityRecord("dirichlet", 0, 1, 10.0, 0.01, delta=0.1, error_hm1=0.2, timings={"total": 1.0})
    second = StabilityRecord("dirichlet", 0, 1, 10.0, 0.01, delta=0.1, error_hm1=0.2, timings={"total": 5.0})
    a = write_records_csv(tmp_path / "a.csv", [first]).read_bytes()
    b = write_records_csv(tmp_path / "b.csv", [second]).read_bytes()
    assert a == b
    rows = read_records_csv(tmp_path / "a.csv")
    assert list(rows[0].keys()) == CSV_COLUMNS
    assert rows[0]["delta"] == "0.1"
    assert rows[0]["modulus"] == ""


def test_record_check_rejects_negative_norms():
    record = StabilityRecord("dirichlet", 0, 0, 10.0, 0.0, delta=-1.0)
    with pytest.raises(ValueError):
        record.check()
    assert not StabilityRecord("dirichlet", 0, 0, 10.0, 0.0, status=STATUS_FAILED).succeeded


def test_record_check_ties_s_to_tau():
    consistent = StabilityRecord("dirichlet", 0, 0, 10.0, 0.0, tau=32.0, s=4.0, s_cutoff=8.0, dimension=3)
    consistent.check()
    pinned = StabilityRecord("dirichlet", 0, 0, 10.0, 0.0, tau=8.0, s=8.0, dimension=3)
    with pytest.raises(ValueError):
        pinned.check()
    with pytest.raises(ValueError):
        StabilityRecord("dirichlet", 0, 0, 10.0, 0.0, s_cutoff=0.0).check()


def test_fit_recovers_power_law():
    records = [{"delta": x, "error_hm1": 3.0 * x**0.5, "status": STATUS_OK} for x in np.geomspace(1e-6, 1e-1, 8)]
    records.append({"delta": 1.0, "error_hm1": 100.0, "status": STATUS_FAILED})
    fit = fit_scaling(records, "delta", "error_hm1")
    assert fit.slope == pytest.approx(0.5, abs=1e-10)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
    assert fit.count == 8


def test_fit_edge_cases():
    flat = [{"x": x, "y": 2.0} for x in (1.0, 2.0, 3.0)]
    assert fit_scaling(flat, "x", "y", Coordinates.LINEAR).slope == 0.0
    with pytest.raises(ValueError):
        fit_scaling([{"x": 1.0, "y": 1.0}], "x", "y")
    with pytest.raises(ValueError):
        fit_scaling([{"x": 1.0, "y": 1.0}, {"x": 1.0, "y": 2.0}], "x", "y")
    semilog = [{"x": x, "y": math.exp(-2.0 * x)} for x in (0.0, 1.0, 2.0)]
    assert fit_scaling(semilog, "x", "y", "semilogy").slope == pytest.approx(-2.0)


def test_triple_log_coordinate():
    assert math.isnan(triple_log_coordinate(2.0, 0.5))
    assert math.isnan(triple_log_coordinate(0.5, 0.5))
    value = triple_log_coordinate(1e-300, 0.5)
    log_r = 0.5 * 300 * math.log(10.0)
    assert value == pytest.approx(math.log(math.log(log_r)) ** -0.4)


def test_array_bundle_and_csv_helpers(tmp_path):
    array = np.arange(6, dtype=float).reshape(2, 3) * (1.0 - 2.0j)
    json_path = write_array_bundle(tmp_path / "arr", array, {"label": "test"})
    loaded, meta = read_array_bundle(json_path)
    assert np.array_equal(loaded, array)
    assert meta["label"] == "test" and meta["shape"] == [2, 3]
    csv_path = write_csv(tmp_path / "t.csv", ["a", "b", "c"], [[0.1, None, True]])
    assert read_csv(csv_path) == [{"a": "0.1", "b": "", "c": "1"}]


# ---------------------------------------------------------------- experiment manager


@pytest.mark.asyncio
async def test_identical_potentials_give_degenerate_records(tmp_path):
    config = tiny_config(tmp_path, potentials={"background": 1.0, "identical": True})
    records = await StabilityExperimentManager(config).run()
    assert [r.status for r in records] == [STATUS_DEGENERATE] * 3
    assert all(r.delta == 0.0 and r.error_hm1 == 0.0 and r.modulus == 0.0 for r in records)


@pytest.mark.asyncio
async def test_oracle_sweep_records(tmp_path):
    config = tiny_config(tmp_path)
    manager = StabilityExperimentManager(config)
    records = await manager.run()
    assert [r.status for r in records] == [STATUS_OK] * 3
    assert [(r.lam_index, r.level_index) for r in records] == [(0, 0), (0, 1), (0, 2)]
    delta0 = records[0].delta
    assert delta0 > 0
    for record in records:
        assert record.delta <= (1.0 + record.level) * delta0 * (1.0 + 1e-12)
        assert record.tau >= config.schedule.cgo_tau_floor
        assert record.s_cutoff == 4.5
        assert record.s == pytest.approx(record.tau**0.4, rel=1e-12)
        assert record.dimension == 3
        assert record.modes == 19
        assert record.error_hm1 >= 0 and record.modulus > 0
        assert record.e_lambda >= 1.0
        assert record.cgo["max_residual"] <= 1e-6
    # oracle estimates do not see map noise
    assert records[0].error_hm1 == records[2].error_hm1


@pytest.mark.asyncio
async def test_one_failing_record_does_not_stop_the_sweep(tmp_path, monkeypatch):
    original = StabilityExperimentManager.evaluate

    def flaky(self, ctx, level_index, level):
        if level_index == 1:
            raise RuntimeError("injected")
        return original(self, ctx, level_index, level)

    monkeypatch.setattr(StabilityExperimentManager, "evaluate", flaky)
    records = await StabilityExperimentManager(tiny_config(tmp_path)).run()
    assert [r.status for r in records] == [STATUS_OK, STATUS_FAILED, STATUS_OK]
    assert "injected" in records[1].error


@pytest.mark.asyncio
async def test_outputs_are_reproducible(tmp_path):
    first = tiny_config(tmp_path / "a")
    second = tiny_config(tmp_path / "b")
    await run_stability_experiment(first)
    await run_stability_experiment(second)
    assert first.output.csv_path.read_bytes() == second.output.csv_path.read_bytes()
    payload = json.loads(first.output.json_path.read_text())
    assert payload["meta"]["grid"]["N"] == 8
    assert len(payload["records"]) == 3
    fit = fit_scaling(read_records_csv(first.output.csv_path), "level", "delta")
    assert fit.count == 2


@pytest.mark.asyncio
async def test_impedance_sweep_uses_impedance_prefactor(tmp_path):
    records = await run_impedance_experiment(tiny_config(tmp_path, levels=[0.0]))
    assert records[0].status == STATUS_OK
    assert records[0].variant == "impedance"
    assert records[0].e_lambda is None
    assert records[0].prefactor == pytest.approx(6.0**6 * b_lambda(6.0))


@pytest.mark.slow
def test_data_mode_sweep(tmp_path):
    config = tiny_config(tmp_path, qhat_mode="data", levels=[0.0, 1e-2], max_runge_defect=1.0)
    records = StabilityExperimentManager(config).run_sync()
    assert [r.status for r in records] == [STATUS_OK, STATUS_OK]
    assert all(0.0 <= r.max_runge_defect <= 1.0 for r in records)


def test_context_perturbation_direction_is_seeded(tmp_path):
    manager = StabilityExperimentManager(tiny_config(tmp_path))
    ctx = manager.build_context(0, 6.0)
    first = manager._unit_perturbation(ctx.partial_diff, 0, 0)
    again = manager._unit_perturbation(ctx.partial_diff, 0, 0)
    other = manager._unit_perturbation(ctx.partial_diff, 0, 1)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)
    assert manager._perturbed(ctx.partial_diff, 0.0, 0, 0) is ctx.partial_diff


# ---------------------------------------------------------------- single stages


def test_single_stages_write_tables(tmp_path):
    config = tiny_config(tmp_path, taus=[8.0, 16.0])
    forward = run_forward_stage(config)
    assert forward[0]["residual"] <= 1e-8 and forward[0]["h1_ratio"] > 0
    dtn = run_dtn_stage(config)
    assert dtn[0]["delta"] > 0 and dtn[0]["cols"] == 6
    cgo = run_cgo_stage(config)
    assert [row["tau"] for row in cgo] == [8.0, 16.0]
    runge = run_runge_stage(config)
    assert len(runge) == 10
    for name in ("forward", "dtn", "cgo", "runge"):
        assert (tmp_path / f"{name}.csv").exists()


def test_reconstruct_stage_dumps_fields(tmp_path):
    records = run_reconstruct_stage(tiny_config(tmp_path))
    assert len(records) == 1 and records[0].status == STATUS_OK
    assert (tmp_path / "reconstruct.csv").exists()
    assert (tmp_path / "dq_rec_l0_k0.json").exists()


# ---------------------------------------------------------------- end-to-end behaviour


def test_noiseless_error_is_truncation_plus_cgo_remainders(tmp_path):
    config = tiny_config(tmp_path, levels=[0.0], schedule={"s_override": 8.0})
    manager = StabilityExperimentManager(config)
    record = manager.evaluate(manager.build_context(0, 6.0), 0, 0.0)
    assert record.status == STATUS_OK and record.modes == 81
    geometry, dq = manager.geometry, manager.q1.difference(manager.q2)
    etas, _ = lowpass_lattice(geometry, 8.0)
    exact = lowpass_invert(geometry, etas, [fourier_coefficient(dq, eta) for eta in etas], 8.0)
    truncation = sobolev_interior_norm(exact.field.with_values(exact.field.values - dq.values), -1)
    estimates = qhat_table(etas, record.tau, 6.0, QhatMode.ORACLE, QhatInputs(manager.q1, manager.q2))
    # Parseval on the torus bounds the H⁻¹ effect of the per-mode errors
    budget = math.sqrt(sum(e.remainder**2 for e in estimates) / geometry.torus_side**geometry.n)
    assert record.error_hm1 <= truncation + budget * 1.01 + 1e-12
    assert record.max_remainder == pytest.approx(max(e.remainder for e in estimates))


@pytest.mark.slow
def test_data_mode_error_grows_with_delta(tmp_path):
    levels = [10.0**k for k in range(1, 8)]
    config = tiny_config(
        tmp_path,
        qhat_mode="data",
        levels=levels,
        potentials={"background": 0.0, "amplitude": 1e-8},
        max_runge_defect=1.0,
    )
    records = StabilityExperimentManager(config).run_sync()
    assert [r.status for r in records] == [STATUS_OK] * len(levels)
    deltas = [r.delta for r in records]
    errors = [r.error_hm1 for r in records]
    assert all(a < b for a, b in zip(deltas, deltas[1:]))
    assert all(a <= b * (1.0 + 1e-9) for a, b in zip(errors, errors[1:]))
    theta = config.schedule.theta
    rows = [
        {"x": triple_log_coordinate(r.delta, theta), "error_hm1": r.error_hm1, "status": r.status}
        for r in records
    ]
    fit = fit_scaling(rows, "x", "error_hm1", Coordinates.LINEAR)
    assert fit.count >= 2
    assert fit.slope >= 0.0


@pytest.mark.slow
def test_prefactor_degrades_near_the_spectrum(tmp_path):
    base = tiny_config(tmp_path)
    manager = StabilityExperimentManager(base)
    bottom = min(dense_spectrum(q)[0] for q in (manager.q1, manager.q2))
    gaps = [0.5, 0.05, 0.005]
    config = tiny_config(tmp_path, lambdas=[bottom - gap for gap in gaps], levels=[0.0])
    records = StabilityExperimentManager(config).run_sync()
    assert [r.status for r in records] == [STATUS_OK] * len(gaps)
    for record, gap in zip(records, gaps):
        assert record.e_lambda == pytest.approx(1.0 / gap, rel=1e-4)
    prefactors = [r.prefactor for r in records]
    assert all(a < b for a, b in zip(prefactors, prefactors[1:]))


@pytest.mark.slow
def test_impedance_h1_ratio_is_nearly_uniform_in_lambda(tmp_path):
    config = tiny_config(
        tmp_path, variant="impedance", lambdas=[1.0, 10.0, 100.0], geometry={"subdivisions": 10}
    )
    ratios = [row["h1_ratio"] for row in run_forward_stage(config)]
    assert all(r > 0 for r in ratios)
    assert max(ratios) / min(ratios) < 3.0
