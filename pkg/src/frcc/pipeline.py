"""End-to-end training and monitoring: the full chart-building pipeline.

Training runs ingest -> day filtering -> missing-point reconstruction ->
penalized smoothing -> standardization -> MFPCA / FPCA -> score regression ->
residual FPCA and control limits. Every fitted quantity is estimated from
Phase I days only; later days never influence the model.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from datetime import date

import numpy as np

from .basis import BasisSystem, make_bspline_basis, second_derivative_penalty
from .config import PipelineConfig
from .errors import ComputationError, ValidationError
from .fofreg import FofModel, fit_fof, residuals_variable
from .fpca import (FpcaModel, GridReconstructionModel, fit_fpca,
                   fit_reconstruction, reconstruct_sparse)
from .ingest import (GridSpec, ProfileSet, aggregate_to_grid, apply_exclusions,
                     filter_profiles, read_exclusion_list, read_records_csv)
from .mfpca import MfpcaModel, fit_mfpca
from .monitor import (ChartResult, MonitorModel, fit_monitor, monitor_phase2,
                      MIN_PHASE1_DAYS)
from .smooth import (DEFAULT_LAMBDA_GRID, FunctionalVariable,
                     StandardizationFunctions, select_lambda_gcv_pooled,
                     smooth_variable, standardize, standardize_with)

FORMAT_VERSION = 1


@dataclass
class TrainedModel:
    """Everything needed to monitor future days, plus training diagnostics."""

    config_snapshot: dict
    fingerprint: str
    grid: GridSpec
    basis: BasisSystem
    response: str
    covariates: tuple[str, ...]
    recon_models: dict[str, GridReconstructionModel]
    lambdas: dict[str, float]
    standardizers: dict[str, StandardizationFunctions]
    covariate_mfpca: MfpcaModel
    response_fpca: FpcaModel
    fof: FofModel
    monitor: MonitorModel
    diagnostics: dict

    @property
    def variables(self) -> tuple[str, ...]:
        return self.covariates + (self.response,)


@dataclass
class TrainResult:
    model: TrainedModel
    phase1_results: list[ChartResult]


def _run_stage(name: str, fn, *args, **kwargs):
    """Run a pipeline step so failures carry the stage name."""
    try:
        return fn(*args, **kwargs)
    except (ValidationError, ComputationError) as exc:
        raise type(exc)(f"[stage {name}] {exc}") from exc


def _stage(name: str):
    def wrap(fn):
        def inner(*args, **kwargs):
            return _run_stage(name, fn, *args, **kwargs)
        return inner
    return wrap


def make_grid(config: PipelineConfig) -> GridSpec:
    lo, hi = config.domain
    points = tuple(np.linspace(lo, hi, config.n_grid, endpoint=False))
    return GridSpec(domain=(lo, hi), points=points, aggregator=config.aggregator)


def _subset_variables(ps: ProfileSet, variables: tuple[str, ...]) -> ProfileSet:
    missing = [v for v in variables if v not in ps.variables]
    if missing:
        raise ValidationError(
            f"variables not found in the data: {missing}; available: {list(ps.variables)}")
    profs = {(d, v): ps.profiles[(d, v)] for d in ps.days for v in variables}
    return ProfileSet(ps.grid, ps.days, variables, profs)


@_stage("ingest")
def _load_profiles(config: PipelineConfig, grid: GridSpec) -> tuple[ProfileSet, dict]:
    records = read_records_csv(config.data_csv)
    ps, agg_report = aggregate_to_grid(records, grid)
    if config.exclusion_list:
        exclusions = read_exclusion_list(config.exclusion_list)
        ps = apply_exclusions(ps, exclusions)
        agg_report["n_exclusion_entries"] = len(exclusions)
    ps = _subset_variables(ps, (config.response,) + config.covariates)
    return ps, agg_report


def _fingerprint(ps: ProfileSet) -> str:
    """Stable digest of the (filtered, pre-reconstruction) training profiles."""
    h = hashlib.sha256()
    for d in ps.days:
        for v in ps.variables:
            p = ps.profiles[(d, v)]
            h.update(d.isoformat().encode())
            h.update(v.encode())
            h.update(np.where(p.observed, p.values, np.nan).tobytes())
            h.update(p.observed.tobytes())
    return h.hexdigest()


@_stage("reconstruct")
def _reconstruct_all(ps: ProfileSet, phase1: ProfileSet, threshold: float,
                     min_obs: int) -> tuple[ProfileSet, dict[str, GridReconstructionModel], dict]:
    """Fit per-variable recovery models on Phase I and fill every kept day."""
    grid_pts = ps.grid.points_array()
    recon: dict[str, GridReconstructionModel] = {}
    filled = ps
    complete_before = sum(
        1 for d in ps.days
        if all(ps.profiles[(d, v)].observed.all() for v in ps.variables))
    for v in ps.variables:
        model = fit_reconstruction(phase1.values_matrix(v), phase1.observed_matrix(v),
                                   grid_pts, threshold)
        recon[v] = model
        values = reconstruct_sparse(ps.values_matrix(v), ps.observed_matrix(v),
                                    model, min_obs)
        filled = filled.replace_variable(v, values, np.ones_like(values, dtype=bool))
    report = {
        "n_days": ps.n_days,
        "n_complete_before": complete_before,
        "n_complete_after": ps.n_days,
        "n_recovered": ps.n_days - complete_before,
    }
    return filled, recon, report


@_stage("smooth")
def _smooth_all(ps: ProfileSet, basis: BasisSystem, lambda_grid,
                lambdas: dict[str, float] | None = None
                ) -> tuple[dict[str, FunctionalVariable], dict[str, float]]:
    grid_pts = ps.grid.points_array()
    penalty = second_derivative_penalty(basis)
    out: dict[str, FunctionalVariable] = {}
    chosen: dict[str, float] = {}
    for v in ps.variables:
        values = ps.values_matrix(v)
        lam = (lambdas[v] if lambdas is not None
               else select_lambda_gcv_pooled(values, basis, grid_pts, lambda_grid, penalty))
        chosen[v] = float(lam)
        out[v] = smooth_variable(values, ps.days, v, basis, grid_pts, lam, penalty)
    return out, chosen


def train(config: PipelineConfig) -> TrainResult:
    """Run the whole Phase I calibration from a pipeline config."""
    grid = make_grid(config)
    basis = make_bspline_basis(config.domain, config.n_basis, config.order)
    ps, agg_report = _load_profiles(config, grid)
    ps, filter_report = filter_profiles(ps, config.min_obs)
    if ps.n_days == 0:
        raise ComputationError("[stage filter] no usable days remain after filtering")
    if not ps.days[0] <= config.phase1_end <= ps.days[-1]:
        raise ValidationError(
            f"phase1_end {config.phase1_end} outside the data range "
            f"[{ps.days[0]}, {ps.days[-1]}]")
    phase1_days = tuple(d for d in ps.days if d <= config.phase1_end)
    if len(phase1_days) < MIN_PHASE1_DAYS:
        raise ComputationError(
            f"only {len(phase1_days)} usable Phase I days; need {MIN_PHASE1_DAYS}")
    phase1 = ps.subset_days(phase1_days)
    fingerprint = _fingerprint(phase1)

    filled, recon_models, recon_report = _reconstruct_all(
        ps, phase1, config.variance_threshold, config.min_obs)
    phase1_filled = filled.subset_days(phase1_days)

    lambda_grid = config.lambda_grid or DEFAULT_LAMBDA_GRID
    fvs, lambdas = _smooth_all(phase1_filled, basis, lambda_grid)

    standardizers: dict[str, StandardizationFunctions] = {}
    std_fvs: dict[str, FunctionalVariable] = {}
    for v in filled.variables:
        try:
            std_fvs[v], standardizers[v] = standardize(fvs[v])
        except ComputationError as exc:
            raise ComputationError(f"[stage standardize] variable {v!r}: {exc}") from exc

    x_std = [std_fvs[v] for v in config.covariates]
    y_std = std_fvs[config.response]
    covariate_mfpca = _run_stage("mfpca", fit_mfpca, x_std, config.variance_threshold)
    response_fpca = _run_stage("fpca", fit_fpca, y_std, config.variance_threshold)
    fof = _run_stage("regression", fit_fof, covariate_mfpca, response_fpca)
    res_fv = _run_stage("residuals", residuals_variable, fof, y_std, x_std)
    monitor_model, phase1_results = _run_stage(
        "monitor", fit_monitor, res_fv, config.variance_threshold, config.alpha_total)

    diagnostics = {
        "phase1_end": config.phase1_end.isoformat(),
        "n_days_total": agg_report["n_days"],
        "n_days_kept": ps.n_days,
        "n_phase1_days": len(phase1_days),
        "n_phase2_days": ps.n_days - len(phase1_days),
        "ingest": agg_report,
        "filter": filter_report,
        "recovery": recon_report,
        "lambdas": lambdas,
        "n_components": {
            "response_M": response_fpca.n_selected,
            "covariates_L": covariate_mfpca.n_selected,
            "residual_R": monitor_model.residual_fpca.n_selected,
        },
        "explained_variance": {
            "response": response_fpca.explained_variance_ratio.tolist(),
            "covariates": covariate_mfpca.explained_variance_ratio.tolist(),
            "residual": monitor_model.residual_fpca.explained_variance_ratio.tolist(),
        },
        "limits": {"t2": monitor_model.t2_limit, "spe": monitor_model.spe_limit},
        "alpha_total": config.alpha_total,
        "alpha_per_chart": monitor_model.alpha_per_chart,
        "phase1_alarms": {
            "t2": [r.day.isoformat() for r in phase1_results if r.t2_alarm],
            "spe": [r.day.isoformat() for r in phase1_results if r.spe_alarm],
        },
    }
    model = TrainedModel(
        config_snapshot=config.snapshot(), fingerprint=fingerprint, grid=grid,
        basis=basis, response=config.response, covariates=config.covariates,
        recon_models=recon_models, lambdas=lambdas, standardizers=standardizers,
        covariate_mfpca=covariate_mfpca, response_fpca=response_fpca, fof=fof,
        monitor=monitor_model, diagnostics=diagnostics)
    return TrainResult(model, phase1_results)


def prepare_profiles(model: TrainedModel, ps: ProfileSet) -> tuple[
        FunctionalVariable, list[FunctionalVariable]]:
    """Reconstruct, smooth, and standardize new profiles with trained parameters."""
    ps = _subset_variables(ps, model.variables)
    min_obs = int(model.config_snapshot.get("min_obs", 4))
    ps, _ = filter_profiles(ps, min_obs)
    if ps.n_days == 0:
        raise ComputationError("no usable days to monitor after filtering")
    filled = ps
    for v in ps.variables:
        values = _run_stage("reconstruct", reconstruct_sparse,
                            ps.values_matrix(v), ps.observed_matrix(v),
                            model.recon_models[v], min_obs)
        filled = filled.replace_variable(v, values, np.ones_like(values, dtype=bool))
    fvs, _ = _smooth_all(filled, model.basis, (), lambdas=model.lambdas)
    std = {v: _run_stage("standardize", standardize_with, fvs[v], model.standardizers[v])
           for v in ps.variables}
    return std[model.response], [std[v] for v in model.covariates]


def monitor_csv(model: TrainedModel, csv_path: str) -> list[ChartResult]:
    """Chart the days found in a new CSV using the trained model.

    Days up to the training phase boundary are tagged "I", later days "II".
    """
    records = read_records_csv(csv_path)
    ps, _ = aggregate_to_grid(records, model.grid)
    y_std, x_std = prepare_profiles(model, ps)
    results = monitor_phase2(model.monitor, model.fof, y_std, x_std)
    cut = date.fromisoformat(model.config_snapshot["phase1_end"])
    return [ChartResult(r.day, r.t2, r.spe, r.t2_alarm, r.spe_alarm,
                        "I" if r.day <= cut else "II")
            for r in results]
