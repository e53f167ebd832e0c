"""Control charts on functional residuals: Hotelling T2 and SPE.

Residuals are compressed with a further FPCA estimated on Phase I data only.
T2 tracks shifts inside the retained residual subspace, SPE tracks what the
subspace misses. Control limits are Gaussian-KDE quantiles of the Phase I
statistics at 1 - alpha_total/2 per chart (equal Bonferroni split); an alarm
requires strict exceedance of a chart's own limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .basis import gram_matrix
from .errors import ComputationError
from .fofreg import FofModel, residuals_variable
from .fpca import FpcaModel, fit_fpca, project_scores
from .smooth import FunctionalVariable

MIN_PHASE1_DAYS = 10


@dataclass(frozen=True)
class MonitorModel:
    residual_fpca: FpcaModel
    t2_limit: float
    spe_limit: float
    alpha_total: float
    phase1_t2: np.ndarray
    phase1_spe: np.ndarray
    phase1_days: tuple

    @property
    def alpha_per_chart(self) -> float:
        return self.alpha_total / 2.0


@dataclass(frozen=True)
class ChartResult:
    day: object
    t2: float
    spe: float
    t2_alarm: bool
    spe_alarm: bool
    phase: str

    @property
    def alarm(self) -> bool:
        return self.t2_alarm or self.spe_alarm


def t2_statistic(scores: np.ndarray, eigenvalues: np.ndarray) -> np.ndarray | float:
    """Hotelling statistic: sum over components of score^2 / eigenvalue."""
    ev = np.asarray(eigenvalues, dtype=float)
    if np.any(ev <= 0.0):
        raise ComputationError("T2 requires strictly positive component variances")
    s = np.asarray(scores, dtype=float)
    out = np.sum(s * s / ev, axis=-1)
    return float(out) if out.ndim == 0 else out


def spe_statistic(residual_coefficients: np.ndarray, model: FpcaModel) -> np.ndarray | float:
    """Integrated squared distance of residual curves from their R-term expansion.

    Computed exactly through the Gram matrix on the coefficient difference.
    """
    C = np.atleast_2d(np.asarray(residual_coefficients, dtype=float))
    W = model.gram if model.gram is not None else gram_matrix(model.basis)
    dev = C - model.mean_coefficients
    psi = model.selected_eigenfunctions
    xi = dev @ W @ psi.T
    diff = dev - xi @ psi
    out = np.einsum("ij,jk,ik->i", diff, W, diff)
    out = np.clip(out, 0.0, None)
    return float(out[0]) if np.ndim(residual_coefficients) == 1 else out


def silverman_bandwidth(samples: np.ndarray) -> float:
    """h = 0.9 * min(SD, IQR / 1.34) * n^(-1/5), with an SD fallback for IQR 0."""
    x = np.asarray(samples, dtype=float)
    sd = float(x.std(ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * len(x) ** (-0.2)


def kde_quantile(samples: np.ndarray, p: float) -> float:
    """Quantile of the Gaussian-KDE distribution fitted to ``samples``.

    The KDE CDF is a mixture of normal CDFs; the quantile is found by
    bracketed root finding to 1e-8. A constant sample returns the constant.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError(f"need at least 2 samples, got {x.size}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must be in (0, 1), got {p}")
    h = silverman_bandwidth(x)
    if h <= 0.0:
        return float(x[0])

    def cdf_minus_p(q: float) -> float:
        return float(ndtr((q - x) / h).mean() - p)

    lo = float(x.min()) - 10.0 * h
    hi = float(x.max()) + 10.0 * h
    while cdf_minus_p(lo) > 0.0:
        lo -= 10.0 * h
    while cdf_minus_p(hi) < 0.0:
        hi += 10.0 * h
    return float(brentq(cdf_minus_p, lo, hi, xtol=1e-8))


def fit_monitor(phase1_residuals: FunctionalVariable, variance_threshold: float = 0.95,
                alpha_total: float = 1.0 / 370.4) -> tuple[MonitorModel, list[ChartResult]]:
    """Calibrate the two charts on Phase I residuals.

    Returns the model plus the Phase I chart results (alarms are reported but
    Phase I observations are not trimmed and the model is not refit).
    """
    if not 0.0 < alpha_total < 1.0:
        raise ValueError(f"alpha_total must be in (0, 1), got {alpha_total}")
    if phase1_residuals.n_days < MIN_PHASE1_DAYS:
        raise ComputationError(
            f"need at least {MIN_PHASE1_DAYS} Phase I residuals, got {phase1_residuals.n_days}")
    if np.allclose(phase1_residuals.coefficients, 0.0, atol=1e-14):
        raise ComputationError("all Phase I residuals are zero; monitoring is degenerate")
    res_fpca = fit_fpca(phase1_residuals, variance_threshold)
    ev = res_fpca.selected_eigenvalues
    if np.any(ev <= 0.0):
        raise ComputationError("residual FPCA produced a zero-variance selected component")
    scores = res_fpca.scores[:, :res_fpca.n_selected]
    t2 = t2_statistic(scores, ev)
    spe = spe_statistic(phase1_residuals.coefficients, res_fpca)
    q = 1.0 - alpha_total / 2.0
    model = MonitorModel(res_fpca, kde_quantile(t2, q), kde_quantile(spe, q),
                         alpha_total, t2, spe, phase1_residuals.days)
    results = _chart_results(model, phase1_residuals.days, t2, spe, phase="I")
    return model, results


def _chart_results(model: MonitorModel, days, t2: np.ndarray, spe: np.ndarray,
                   phase: str) -> list[ChartResult]:
    return [
        ChartResult(day, float(t2[i]), float(spe[i]),
                    bool(t2[i] > model.t2_limit), bool(spe[i] > model.spe_limit), phase)
        for i, day in enumerate(days)
    ]


def score_residuals(model: MonitorModel, res_fv: FunctionalVariable) -> tuple[np.ndarray, np.ndarray]:
    """T2 and SPE for residual curves using the training eigenstructure."""
    scores = project_scores(model.residual_fpca, res_fv)
    t2 = t2_statistic(scores, model.residual_fpca.selected_eigenvalues)
    spe = spe_statistic(res_fv.coefficients, model.residual_fpca)
    return np.atleast_1d(t2), np.atleast_1d(spe)


def monitor_phase2(model: MonitorModel, fof: FofModel, y_fv: FunctionalVariable,
                   x_fvs: list[FunctionalVariable], phase: str = "II") -> list[ChartResult]:
    """Chart new days: residuals, training-eigenfunction scores, alarms."""
    res_fv = residuals_variable(fof, y_fv, x_fvs)
    t2, spe = score_residuals(model, res_fv)
    return _chart_results(model, res_fv.days, t2, spe, phase=phase)


def monitor_residuals(model: MonitorModel, res_fv: FunctionalVariable,
                      phase: str = "II") -> list[ChartResult]:
    """Chart already-computed residual curves (used for injection studies)."""
    t2, spe = score_residuals(model, res_fv)
    return _chart_results(model, res_fv.days, t2, spe, phase=phase)
