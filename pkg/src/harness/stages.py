"""
Single-stage runs behind the forward / dtn / cgo / runge / reconstruct subcommands.

Each stage runs one stage of the pipeline over the configured λ values and
writes a CSV table (plus binary+JSON dumps when `output.dump_fields` is set).
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from src.cgo.solver import cgo_family, fit_growth_rate
from src.domain.fields import boundary_field
from src.domain.geometry import Geometry, build_geometry
from src.domain.norms import boundary_sobolev_norm, sobolev_interior_norm
from src.forward.helmholtz import helmholtz_operator, robin_operator, solve_dirichlet, solve_robin
from src.forward.maps import assemble_dtn, assemble_rtd, operator_norm, trace_basis
from src.harness.config import ExperimentConfig
from src.harness.experiment_manager import StabilityExperimentManager
from src.harness.fitting import Coordinates, fit_scaling
from src.my_util.my_io import write_csv
from src.reconstruct.schedule import ScheduleParams, schedule
from src.runge.approximation import (
    assemble_runge_operator,
    runge_approximate,
    runge_tradeoff_curve,
    threshold_schedule,
)
from src.spectral.eigen import eigenpairs_near
from src.spectral.weights import Variant

logger = logging.getLogger(__name__)

Rows = List[Dict[str, Any]]


def _write_rows(config: ExperimentConfig, name: str, rows: Rows) -> Path:
    columns = list(rows[0].keys()) if rows else []
    path = Path(config.output.directory) / f"{name}.csv"
    return write_csv(path, columns, ([row[c] for c in columns] for row in rows))


def _setup(config: ExperimentConfig) -> Tuple[Geometry, Any, Any]:
    geometry = build_geometry(config.geometry)
    q1, q2 = config.potentials.build(geometry)
    return geometry, q1, q2


def run_forward_stage(config: ExperimentConfig) -> Rows:
    """One boundary-driven solve per λ with residuals and the H¹/datum ratio."""
    geometry, q1, _ = _setup(config)
    basis = trace_basis(geometry, geometry.gamma_mask, 1)
    phi = boundary_field(geometry, basis.vectors[:, 0], name="phi")
    datum = boundary_sobolev_norm(phi, 0)
    rows: Rows = []
    for lam in config.lambdas:
        row: Dict[str, Any] = {"lam": lam, "variant": config.variant.value}
        if config.variant is Variant.IMPEDANCE:
            params = config.impedance.params(geometry)
            u = solve_robin(q1, lam, params, phi=phi, stencil=config.impedance.stencil)
            interior, boundary = robin_operator(q1, lam, params, config.impedance.stencil).residuals(u, phi=phi.values)
            row.update({"residual": interior, "boundary_residual": boundary})
        else:
            u = solve_dirichlet(q1, lam, phi=phi)
            window = eigenpairs_near(q1, lam, config.spectral_window)
            row.update({"residual": helmholtz_operator(q1, lam).residual(u), "spectral_distance": window.distance})
        h1 = sobolev_interior_norm(u, 1)
        row.update({"l2": sobolev_interior_norm(u, 0), "h1": h1, "h1_ratio": h1 / datum})
        rows.append(row)
        if config.output.dump_fields:
            u.export(Path(config.output.directory) / f"u_lam{lam:g}")
        logger.info(f"forward λ={lam:g}: residual={row['residual']:.3e}, ‖u‖_H¹/‖φ‖={row['h1_ratio']:.4g}")
    _write_rows(config, "forward", rows)
    return rows


def run_dtn_stage(config: ExperimentConfig) -> Rows:
    """Partial boundary maps of both potentials and the weighted norm of their difference."""
    geometry, q1, q2 = _setup(config)
    basis = trace_basis(geometry, geometry.gamma_mask, config.basis_size)
    rows: Rows = []
    for lam in config.lambdas:
        if config.variant is Variant.IMPEDANCE:
            params = config.impedance.params(geometry)
            maps = [assemble_rtd(q, lam, params, basis=basis, stencil=config.impedance.stencil) for q in (q1, q2)]
        else:
            maps = [assemble_dtn(q, lam, basis=basis, stencil_order=config.dtn_stencil_order) for q in (q1, q2)]
        diff = maps[0].difference(maps[1])
        rows.append(
            {
                "lam": lam,
                "kind": diff.kind.value,
                "rows": diff.matrix.shape[0],
                "cols": diff.matrix.shape[1],
                "norm_q1": operator_norm(maps[0]),
                "norm_q2": operator_norm(maps[1]),
                "delta": operator_norm(diff),
            }
        )
        if config.output.dump_fields:
            maps[0].export(Path(config.output.directory) / f"map_q1_lam{lam:g}")
            diff.export(Path(config.output.directory) / f"map_diff_lam{lam:g}")
    _write_rows(config, "dtn", rows)
    return rows


def _stage_frequency(geometry: Geometry) -> np.ndarray:
    eta = np.zeros(geometry.n)
    eta[0] = 2.0 * np.pi / geometry.torus_side
    return eta


def run_cgo_stage(config: ExperimentConfig) -> Rows:
    """CGO families over the τ grid with the remainder decay slope and the fitted ϰ."""
    geometry, q1, _ = _setup(config)
    eta = _stage_frequency(geometry)
    rows: Rows = []
    for lam in config.lambdas:
        solutions = cgo_family(q1, eta, lam, config.taus)
        family = [{"lam": lam, "tau": tau, **sol.diagnostics()} for tau, sol in zip(config.taus, solutions)]
        if len(solutions) >= 2:
            decay = fit_scaling(family, "imag_norm", "w_norm", Coordinates.LOGLOG)
            kappa = fit_growth_rate(solutions)
            logger.info(f"cgo λ={lam:g}: ‖w‖ decay slope {decay}, ϰ ≈ {kappa:.4g}")
        rows.extend(family)
    _write_rows(config, "cgo", rows)
    return rows


def _threshold_grid(singular_values: np.ndarray, points: int = 10) -> np.ndarray:
    top = float(singular_values[0]) * 2.0
    bottom = max(float(singular_values[-1]) * 0.5, top * 1e-16)
    return np.geomspace(top, bottom, points)


def run_runge_stage(config: ExperimentConfig) -> Rows:
    """Runge tradeoff (‖v_t‖, ‖φ_t‖) for a CGO target on Ω₀, plus the scheduled threshold."""
    geometry, q1, _ = _setup(config)
    params = config.impedance.params(geometry) if config.variant is Variant.IMPEDANCE else None
    eta = _stage_frequency(geometry)
    rows: Rows = []
    for lam in config.lambdas:
        op = assemble_runge_operator(q1, lam, basis_size=config.basis_size, params=params)
        target = cgo_family(q1, eta, lam, config.taus[:1])[0].on_omega0()
        ts = _threshold_grid(op.singular_values)
        for point in runge_tradeoff_curve(op, target, ts):
            rows.append(
                {
                    "lam": lam,
                    "t": point.t,
                    "defect_norm": point.defect_norm,
                    "datum_norm": point.datum_norm,
                    "kept_modes": point.kept_modes,
                }
            )
        eps = schedule(max(config.taus[0], 1.0), _base_schedule(config, geometry)).eps
        t_sched = threshold_schedule(eps, config.schedule.c)
        scheduled = runge_approximate(op, target, t_sched)
        logger.info(
            f"runge λ={lam:g}: scheduled t={t_sched:.3e}, ‖v_t‖={scheduled.defect_norm:.3e}, "
            f"‖φ_t‖={scheduled.datum_norm:.3e}"
        )
    _write_rows(config, "runge", rows)
    return rows


def _base_schedule(config: ExperimentConfig, geometry: Geometry) -> ScheduleParams:
    knobs = config.schedule
    return ScheduleParams(n=geometry.n, kappa=knobs.kappa, c=knobs.c, theta=knobs.theta, delta_interp=knobs.delta_interp)


def run_reconstruct_stage(config: ExperimentConfig) -> Sequence[Any]:
    """Noiseless reconstruction: the stability pipeline at level 0 with field dumps."""
    output = config.output.model_copy(
        update={"dump_fields": True, "records_csv": "reconstruct.csv", "records_json": "reconstruct.json"}
    )
    single = config.model_copy(update={"levels": [0.0], "output": output})
    manager = StabilityExperimentManager(single)
    records = manager.run_sync()
    manager.write_outputs(records)
    return records
