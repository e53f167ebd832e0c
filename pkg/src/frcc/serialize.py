"""Versioned JSON persistence of trained models.

Floats are emitted with shortest-repr precision, so save -> load -> save is
byte-identical. The Gram matrix is recomputed from the basis on load (its
quadrature is deterministic), everything else round-trips verbatim.
"""

from __future__ import annotations

import json
from datetime import date
from pathlib import Path

import numpy as np

from .basis import BasisSystem, gram_matrix, make_bspline_basis
from ._util import atomic_write_text
from .errors import ValidationError
from .fofreg import FofModel
from .fpca import FpcaModel, GridReconstructionModel
from .ingest import GridSpec
from .mfpca import MfpcaModel
from .monitor import MonitorModel
from .pipeline import FORMAT_VERSION, TrainedModel
from .smooth import StandardizationFunctions


def _days_out(days) -> list[str]:
    return [d.isoformat() for d in days]


def _days_in(items) -> tuple[date, ...]:
    return tuple(date.fromisoformat(d) for d in items)


def _fpca_out(m: FpcaModel) -> dict:
    return {
        "mean_coefficients": m.mean_coefficients.tolist(),
        "eigenfunction_coefficients": m.eigenfunction_coefficients.tolist(),
        "eigenvalues": m.eigenvalues.tolist(),
        "scores": m.scores.tolist(),
        "explained_variance_ratio": m.explained_variance_ratio.tolist(),
        "n_selected": m.n_selected,
        "days": _days_out(m.days),
    }


def _fpca_in(doc: dict, basis: BasisSystem, gram: np.ndarray) -> FpcaModel:
    return FpcaModel(
        basis=basis,
        mean_coefficients=np.array(doc["mean_coefficients"]),
        eigenfunction_coefficients=np.array(doc["eigenfunction_coefficients"]),
        eigenvalues=np.array(doc["eigenvalues"]),
        scores=np.array(doc["scores"]),
        explained_variance_ratio=np.array(doc["explained_variance_ratio"]),
        n_selected=int(doc["n_selected"]),
        days=_days_in(doc["days"]),
        gram=gram,
    )


def model_to_doc(model: TrainedModel) -> dict:
    mon = model.monitor
    return {
        "format_version": FORMAT_VERSION,
        "config": model.config_snapshot,
        "fingerprint": model.fingerprint,
        "grid": {
            "domain": list(model.grid.domain),
            "points": list(model.grid.points),
            "aggregator": model.grid.aggregator,
        },
        "basis": {
            "domain": list(model.basis.domain),
            "order": model.basis.order,
            "n_basis": model.basis.n_basis,
        },
        "response": model.response,
        "covariates": list(model.covariates),
        "reconstruction": {
            v: {
                "grid": r.grid.tolist(),
                "mean_values": r.mean_values.tolist(),
                "components": r.components.tolist(),
                "eigenvalues": r.eigenvalues.tolist(),
                "noise_variance": r.noise_variance,
            }
            for v, r in model.recon_models.items()
        },
        "lambdas": dict(model.lambdas),
        "standardizers": {
            v: {
                "mean_coefficients": s.mean_coefficients.tolist(),
                "grid": s.grid.tolist(),
                "sd_values": s.sd_values.tolist(),
            }
            for v, s in model.standardizers.items()
        },
        "covariate_mfpca": {
            "variables": list(model.covariate_mfpca.variables),
            "mean_coefficients": model.covariate_mfpca.mean_coefficients.tolist(),
            "eigenfunction_coefficients": model.covariate_mfpca.eigenfunction_coefficients.tolist(),
            "eigenvalues": model.covariate_mfpca.eigenvalues.tolist(),
            "scores": model.covariate_mfpca.scores.tolist(),
            "explained_variance_ratio": model.covariate_mfpca.explained_variance_ratio.tolist(),
            "n_selected": model.covariate_mfpca.n_selected,
            "days": _days_out(model.covariate_mfpca.days),
        },
        "response_fpca": _fpca_out(model.response_fpca),
        "fof": {
            "coefficients": model.fof.coefficients.tolist(),
            "training_days": _days_out(model.fof.training_days),
        },
        "monitor": {
            "residual_fpca": _fpca_out(mon.residual_fpca),
            "t2_limit": mon.t2_limit,
            "spe_limit": mon.spe_limit,
            "alpha_total": mon.alpha_total,
            "phase1_t2": mon.phase1_t2.tolist(),
            "phase1_spe": mon.phase1_spe.tolist(),
            "phase1_days": _days_out(mon.phase1_days),
        },
        "diagnostics": model.diagnostics,
    }


def model_from_doc(doc: dict) -> TrainedModel:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(
            f"model format version {version!r} not supported (expected {FORMAT_VERSION})")
    grid = GridSpec(domain=tuple(doc["grid"]["domain"]),
                    points=tuple(doc["grid"]["points"]),
                    aggregator=doc["grid"]["aggregator"])
    b = doc["basis"]
    basis = make_bspline_basis(tuple(b["domain"]), b["n_basis"], b["order"])
    gram = gram_matrix(basis)
    recon = {
        v: GridReconstructionModel(
            grid=np.array(r["grid"]),
            mean_values=np.array(r["mean_values"]),
            components=np.array(r["components"]),
            eigenvalues=np.array(r["eigenvalues"]),
            noise_variance=float(r["noise_variance"]),
        )
        for v, r in doc["reconstruction"].items()
    }
    standardizers = {
        v: StandardizationFunctions(
            basis=basis,
            mean_coefficients=np.array(s["mean_coefficients"]),
            grid=np.array(s["grid"]),
            sd_values=np.array(s["sd_values"]),
        )
        for v, s in doc["standardizers"].items()
    }
    cm = doc["covariate_mfpca"]
    covariate_mfpca = MfpcaModel(
        variables=tuple(cm["variables"]),
        basis=basis,
        mean_coefficients=np.array(cm["mean_coefficients"]),
        eigenfunction_coefficients=np.array(cm["eigenfunction_coefficients"]),
        eigenvalues=np.array(cm["eigenvalues"]),
        scores=np.array(cm["scores"]),
        explained_variance_ratio=np.array(cm["explained_variance_ratio"]),
        n_selected=int(cm["n_selected"]),
        days=_days_in(cm["days"]),
        gram=gram,
    )
    response_fpca = _fpca_in(doc["response_fpca"], basis, gram)
    fof = FofModel(
        covariates=covariate_mfpca,
        response=response_fpca,
        coefficients=np.array(doc["fof"]["coefficients"]),
        training_days=_days_in(doc["fof"]["training_days"]),
    )
    mon = doc["monitor"]
    monitor = MonitorModel(
        residual_fpca=_fpca_in(mon["residual_fpca"], basis, gram),
        t2_limit=float(mon["t2_limit"]),
        spe_limit=float(mon["spe_limit"]),
        alpha_total=float(mon["alpha_total"]),
        phase1_t2=np.array(mon["phase1_t2"]),
        phase1_spe=np.array(mon["phase1_spe"]),
        phase1_days=_days_in(mon["phase1_days"]),
    )
    return TrainedModel(
        config_snapshot=doc["config"],
        fingerprint=doc["fingerprint"],
        grid=grid,
        basis=basis,
        response=doc["response"],
        covariates=tuple(doc["covariates"]),
        recon_models=recon,
        lambdas={v: float(l) for v, l in doc["lambdas"].items()},
        standardizers=standardizers,
        covariate_mfpca=covariate_mfpca,
        response_fpca=response_fpca,
        fof=fof,
        monitor=monitor,
        diagnostics=doc["diagnostics"],
    )


def dumps_model(model: TrainedModel) -> str:
    return json.dumps(model_to_doc(model), sort_keys=True, separators=(",", ":")) + "\n"


def save_model(model: TrainedModel, path: str | Path) -> None:
    atomic_write_text(path, dumps_model(model))


def load_model(path: str | Path) -> TrainedModel:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"model file {path} is not valid JSON: {exc}") from None
    return model_from_doc(doc)
