"""
Stability Experiment Manager
Builds per-λ boundary data, sweeps map perturbations and records the
reconstruction error next to the stability modulus.
"""
import asyncio
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.cgo.faddeev import CgoTorus
from src.cgo.solver import cgo_family, fit_growth_rate
from src.domain.fields import Potential
from src.domain.fourier import lowpass_lattice
from src.domain.geometry import Geometry, build_geometry
from src.domain.norms import sobolev_interior_norm
from src.forward.helmholtz import ImpedanceParams, clear_operator_cache
from src.forward.maps import (
    BoundaryMap,
    assemble_dtn,
    assemble_rtd,
    full_boundary_map,
    operator_norm,
    trace_basis,
)
from src.harness.config import ExperimentConfig, QhatModeName
from src.harness.records import (
    STATUS_DEGENERATE,
    STATUS_FAILED,
    StabilityRecord,
    write_records_csv,
    write_records_json,
)
from src.my_util import fingerprint
from src.reconstruct.lowpass import lowpass_invert
from src.reconstruct.modulus import ModulusSpec, on_triple_log_branch, phi_c_log
from src.reconstruct.qhat import QhatInputs, QhatMode, qhat_table
from src.reconstruct.schedule import ScheduleParams, schedule, select_tau
from src.runge.approximation import RungeOperator, assemble_runge_operator
from src.spectral.eigen import clear_spectral_cache, eigenpairs_near
from src.spectral.weights import Variant, b_lambda, e_lambda, modulus_prefactor

PURPOSE_PARTIAL = 0
PURPOSE_FULL = 1


@dataclass
class LambdaContext:
    """Everything a perturbation level at fixed λ reuses."""

    lam_index: int
    lam: float
    partial_diff: BoundaryMap
    delta0: float
    e_lambda: Optional[float]
    b_lambda: float
    prefactor: float
    schedule: ScheduleParams
    full_diff: Optional[BoundaryMap] = None
    runge1: Optional[RungeOperator] = None
    runge2: Optional[RungeOperator] = None
    torus: Optional[CgoTorus] = None
    timings: Dict[str, float] = field(default_factory=dict)


class StabilityExperimentManager:
    """
    Runs the stability pipeline for every (λ, perturbation level) of a config.

    Per-λ contexts are built once; levels run concurrently in worker threads
    bounded by `config.threads`. Any exception inside one record becomes a
    failed record and the sweep continues.
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.logger = logging.getLogger(__name__)
        self.variant = config.variant
        self.geometry: Geometry = build_geometry(config.geometry)
        self.q1, self.q2 = config.potentials.build(self.geometry)
        self.params: Optional[ImpedanceParams] = (
            config.impedance.params(self.geometry) if self.variant is Variant.IMPEDANCE else None
        )
        self.modulus_spec = ModulusSpec(c=config.schedule.c, n=self.geometry.n)
        self.records: List[StabilityRecord] = []

        self.logger.info(f"Experiment '{config.name}' ({self.variant.value}):")
        self.logger.info(f"  - Grid: N={self.geometry.N}, h={self.geometry.h:.4g}, n={self.geometry.n}")
        self.logger.info(f"  - Potentials: q1={self.q1.fingerprint}, q2={self.q2.fingerprint}")
        self.logger.info(f"  - λ values: {config.lambdas}, levels: {config.levels}")

    def print_status(self, message: str, status: str = "INFO"):
        if status == "SUCCESS":
            print(f"✅ {message}")
        elif status == "ERROR":
            print(f"❌ {message}")
        elif status == "WARNING":
            print(f"⚠️  {message}")
        else:
            print(f"ℹ️  {message}")

    # ------------------------------------------------------------------ context

    def _assemble_partial(self, q: Potential, lam: float) -> BoundaryMap:
        basis = trace_basis(self.geometry, self.geometry.gamma_mask, self.config.basis_size)
        if self.params is None:
            return assemble_dtn(q, lam, basis=basis, stencil_order=self.config.dtn_stencil_order)
        return assemble_rtd(q, lam, self.params, basis=basis, stencil=self.config.impedance.stencil)

    def _fitted_kappa(self, lam: float) -> float:
        taus = self.config.taus
        solutions = cgo_family(self.q1, np.zeros(self.geometry.n), lam, taus)
        kappa = max(fit_growth_rate(solutions), 0.0)
        self.logger.info(f"Fitted ϰ = {kappa:.4g} from {len(taus)} CGO solves at λ={lam:g}")
        return kappa

    def build_context(self, lam_index: int, lam: float) -> LambdaContext:
        cfg = self.config
        start = time.perf_counter()
        lam1 = self._assemble_partial(self.q1, lam)
        lam2 = self._assemble_partial(self.q2, lam)
        partial_diff = lam1.difference(lam2)
        delta0 = operator_norm(partial_diff)
        maps_time = time.perf_counter() - start

        e_value: Optional[float] = None
        if self.variant is Variant.DIRICHLET:
            windows = [eigenpairs_near(q, lam, cfg.spectral_window) for q in (self.q1, self.q2)]
            e_value = e_lambda(lam, windows)
        prefactor = modulus_prefactor(
            lam, 1.0 if e_value is None else e_value, self.variant, cfg.impedance.lam0
        )
        kappa = self._fitted_kappa(lam) if cfg.schedule.fit_kappa else cfg.schedule.kappa
        base = ScheduleParams(
            n=self.geometry.n,
            kappa=kappa,
            c=cfg.schedule.c,
            theta=cfg.schedule.theta,
            delta_interp=cfg.schedule.delta_interp,
        )
        context = LambdaContext(
            lam_index, float(lam), partial_diff, delta0, e_value, b_lambda(lam), prefactor, base
        )
        context.torus = CgoTorus.around_omega0(self.geometry)

        if cfg.qhat_mode is QhatModeName.DATA and delta0 > 0:
            start = time.perf_counter()
            everywhere = np.ones(self.geometry.boundary_count, dtype=bool)
            full_basis = trace_basis(self.geometry, everywhere, cfg.full_basis_size)
            full1 = full_boundary_map(self.q1, lam, full_basis, self.params)
            full2 = full_boundary_map(self.q2, lam, full_basis, self.params)
            context.full_diff = full1.difference(full2)
            context.runge1 = assemble_runge_operator(self.q1, lam, basis=full_basis, params=self.params)
            context.runge2 = assemble_runge_operator(self.q2, lam, basis=full_basis, params=self.params)
            context.timings["data"] = time.perf_counter() - start
        context.timings["maps"] = maps_time
        self.logger.info(
            f"λ={lam:g}: δ₀={delta0:.4e}, e_λ={e_value}, b_λ={context.b_lambda:.4g}, prefactor={prefactor:.4e}"
        )
        return context

    # ------------------------------------------------------------------ levels

    def _unit_perturbation(self, target: BoundaryMap, lam_index: int, purpose: int) -> np.ndarray:
        """Seeded Gaussian direction with unit norm in the map's own (weighted) norm; shared by all levels at one λ."""
        rng = np.random.default_rng([self.config.seed, lam_index, purpose])
        shape = target.matrix.shape
        noise = rng.standard_normal(shape)
        if np.iscomplexobj(target.matrix):
            noise = noise + 1j * rng.standard_normal(shape)
        norm = operator_norm(target.with_matrix(noise))
        return noise / norm

    def _perturbed(self, target: BoundaryMap, level: float, lam_index: int, purpose: int) -> BoundaryMap:
        base = operator_norm(target)
        if level == 0.0 or base == 0.0:
            return target
        noise = self._unit_perturbation(target, lam_index, purpose)
        return target.with_matrix(target.matrix + level * base * noise)

    def _qhat_inputs(self, ctx: LambdaContext, full_diff: Optional[BoundaryMap]) -> QhatInputs:
        return QhatInputs(
            self.q1,
            self.q2,
            map_diff=full_diff,
            runge1=ctx.runge1,
            runge2=ctx.runge2,
            runge_threshold=self.config.runge_threshold,
            max_defect=self.config.max_runge_defect,
            torus=ctx.torus,
        )

    def evaluate(self, ctx: LambdaContext, level_index: int, level: float) -> StabilityRecord:
        cfg = self.config
        record = StabilityRecord(
            self.variant.value, ctx.lam_index, level_index, ctx.lam, float(level),
            e_lambda=ctx.e_lambda, b_lambda=ctx.b_lambda, prefactor=ctx.prefactor,
            dimension=self.geometry.n,
        )
        start = time.perf_counter()
        partial = self._perturbed(ctx.partial_diff, level, ctx.lam_index, PURPOSE_PARTIAL)
        delta = operator_norm(partial)
        record.delta = delta
        if delta == 0.0:
            record.status = STATUS_DEGENERATE
            record.frak_c = 0.0
            record.error_hm1 = 0.0
            record.relative_error_hm1 = 0.0
            record.phi_c = 0.0
            record.modulus = 0.0
            record.timings["total"] = time.perf_counter() - start
            self.logger.info(f"λ={ctx.lam:g}, level={level:g}: zero map difference, degenerate record")
            return record

        theta = cfg.schedule.theta
        frak_c = delta**theta
        tau_selected = select_tau(frak_c, ctx.schedule.kappa, self.geometry.n)
        tau = max(tau_selected, cfg.schedule.cgo_tau_floor)
        params = schedule(tau, ctx.schedule)
        s = cfg.schedule.s_override if cfg.schedule.s_override is not None else params.s
        record.frak_c = frak_c
        record.tau_selected = tau_selected
        record.tau = tau
        record.s = params.s
        record.s_cutoff = s
        record.eps = params.eps

        full_diff = None
        if ctx.full_diff is not None:
            full_diff = self._perturbed(ctx.full_diff, level, ctx.lam_index, PURPOSE_FULL)
        etas, _ = lowpass_lattice(self.geometry, s)
        mode = QhatMode(cfg.qhat_mode.value)
        estimates = qhat_table(etas, tau, ctx.lam, mode, self._qhat_inputs(ctx, full_diff))
        record.timings["qhat"] = time.perf_counter() - start

        result = lowpass_invert(self.geometry, etas, [e.value for e in estimates], s, kappa=self.q1.kappa)
        dq = self.q1.difference(self.q2)
        error = sobolev_interior_norm(result.field.with_values(result.field.values - dq.values), -1)
        reference = sobolev_interior_norm(dq, -1)
        record.modes = result.modes
        record.tail_bound = result.tail_bound
        record.tail_norm_bound = result.tail_norm_bound
        record.error_hm1 = error
        record.relative_error_hm1 = error / reference if reference > 0 else 0.0

        log_r = -math.log(frak_c)
        record.phi_c = phi_c_log(log_r, self.modulus_spec)
        record.modulus = ctx.prefactor * record.phi_c
        record.triple_log_branch = on_triple_log_branch(log_r, self.modulus_spec)
        record.max_remainder = max(e.remainder for e in estimates)
        defects = [d for e in estimates for d in e.runge_defects]
        record.max_runge_defect = max(defects) if defects else None
        record.cgo = {
            "max_iterations": max(d["iterations"] for e in estimates for d in e.cgo),
            "max_residual": max(d["residual"] for e in estimates for d in e.cgo),
            "max_stencil_residual": max(d["stencil_residual"] for e in estimates for d in e.cgo),
            "max_remainder_bound": max(d["remainder_bound"] for e in estimates for d in e.cgo),
        }
        if cfg.output.dump_fields:
            out = Path(cfg.output.directory) / f"dq_rec_l{ctx.lam_index}_k{level_index}"
            result.field.export(out)
        record.timings["total"] = time.perf_counter() - start
        record.check()
        self.logger.info(
            f"λ={ctx.lam:g}, level={level:g}: δ={delta:.3e}, τ={tau:.3g}, s={s:.3g}, "
            f"H⁻¹ error={error:.3e} ({record.relative_error_hm1:.2%}), modulus={record.modulus:.3e}"
        )
        return record

    def _failed(self, lam_index: int, lam: float, level_index: int, level: float, exc: BaseException) -> StabilityRecord:
        self.logger.error(f"Record λ={lam:g}, level={level:g} failed: {type(exc).__name__}: {exc}")
        return StabilityRecord(
            self.variant.value, lam_index, level_index, float(lam), float(level),
            status=STATUS_FAILED, error=f"{type(exc).__name__}: {exc}",
        )

    # ------------------------------------------------------------------ driver

    async def _run_record(self, semaphore: asyncio.Semaphore, ctx: LambdaContext, level_index: int, level: float) -> StabilityRecord:
        async with semaphore:
            try:
                return await asyncio.to_thread(self.evaluate, ctx, level_index, level)
            except Exception as exc:
                return self._failed(ctx.lam_index, ctx.lam, level_index, level, exc)

    async def run(self) -> List[StabilityRecord]:
        cfg = self.config
        semaphore = asyncio.Semaphore(cfg.threads)
        records: List[StabilityRecord] = []
        for lam_index, lam in enumerate(cfg.lambdas):
            self.print_status(f"λ = {lam:g} ({lam_index + 1}/{len(cfg.lambdas)})")
            try:
                ctx = await asyncio.to_thread(self.build_context, lam_index, lam)
            except Exception as exc:
                records.extend(self._failed(lam_index, lam, k, level, exc) for k, level in enumerate(cfg.levels))
                continue
            tasks = [self._run_record(semaphore, ctx, k, level) for k, level in enumerate(cfg.levels)]
            records.extend(await asyncio.gather(*tasks))
            clear_operator_cache()
        clear_spectral_cache()
        records.sort(key=lambda r: (r.lam_index, r.level_index))
        self.records = records
        failed = sum(1 for r in records if not r.succeeded)
        if failed:
            self.print_status(f"{failed}/{len(records)} records failed", "WARNING")
        else:
            self.print_status(f"All {len(records)} records succeeded", "SUCCESS")
        return records

    def run_sync(self) -> List[StabilityRecord]:
        return asyncio.run(self.run())

    def metadata(self) -> Dict[str, Any]:
        return {
            "name": self.config.name,
            "variant": self.variant.value,
            "config": self.config.model_dump(mode="json"),
            "grid": {"N": self.geometry.N, "h": self.geometry.h, "n": self.geometry.n},
            "q1": self.q1.fingerprint,
            "q2": self.q2.fingerprint,
            "run_id": fingerprint(self.q1.values, self.q2.values, np.asarray(self.config.lambdas, dtype=float)),
        }

    def write_outputs(self, records: Optional[List[StabilityRecord]] = None) -> Tuple[Path, Path]:
        records = self.records if records is None else records
        output = self.config.output
        csv_path = write_records_csv(output.csv_path, records)
        json_path = write_records_json(output.json_path, records, self.metadata())
        return csv_path, json_path


async def run_stability_experiment(config: ExperimentConfig) -> List[StabilityRecord]:
    """Dirichlet stability sweep; records are also written to the configured outputs."""
    if config.variant is not Variant.DIRICHLET:
        config = ExperimentConfig.model_validate({**config.model_dump(), "variant": Variant.DIRICHLET.value})
    manager = StabilityExperimentManager(config)
    records = await manager.run()
    manager.write_outputs(records)
    return records


async def run_impedance_experiment(config: ExperimentConfig) -> List[StabilityRecord]:
    """The same pipeline with Robin solves, RtD maps and the λ⁶b_λ prefactor."""
    if config.variant is not Variant.IMPEDANCE:
        config = ExperimentConfig.model_validate({**config.model_dump(), "variant": Variant.IMPEDANCE.value})
    manager = StabilityExperimentManager(config)
    records = await manager.run()
    manager.write_outputs(records)
    return records


def run_stability_experiment_sync(config: ExperimentConfig) -> List[StabilityRecord]:
    return asyncio.run(run_stability_experiment(config))


def run_impedance_experiment_sync(config: ExperimentConfig) -> List[StabilityRecord]:
    return asyncio.run(run_impedance_experiment(config))
