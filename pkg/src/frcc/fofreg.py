"""Function-on-function regression of response scores on covariate scores.

Because the covariate scores are (empirically) uncorrelated, each coefficient
is the componentwise ratio b_lm = sum_i(y_im * x_il) / sum_i(x_il^2), not a
joint least-squares fit. Coefficient surfaces, predictions, and functional
residuals all derive from that matrix together with the two score models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import eval_basis
from .errors import ComputationError
from .fpca import FpcaModel
from .mfpca import MfpcaModel, mfpca_scores
from .smooth import FunctionalVariable


@dataclass(frozen=True)
class FofModel:
    covariates: MfpcaModel
    response: FpcaModel
    coefficients: np.ndarray    # (L, M)
    training_days: tuple

    @property
    def n_covariate_components(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n_response_components(self) -> int:
        return self.coefficients.shape[1]


@dataclass(frozen=True)
class CoefficientSurface:
    """Values of one covariate's coefficient surface beta_k on an (s, t) grid."""

    variable: str
    s_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray   # (len(s_grid), len(t_grid))


@dataclass(frozen=True)
class FunctionalResidual:
    day: object
    coefficients: np.ndarray


def fof_coefficients(x_scores: np.ndarray, y_scores: np.ndarray) -> np.ndarray:
    """Componentwise score-regression coefficients, (L, M)."""
    X = np.atleast_2d(np.asarray(x_scores, dtype=float))
    Y = np.atleast_2d(np.asarray(y_scores, dtype=float))
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"score row counts differ: {X.shape[0]} vs {Y.shape[0]}")
    denom = np.sum(X * X, axis=0)
    dead = np.nonzero(denom == 0.0)[0]
    if dead.size:
        raise ComputationError(
            f"covariate score component {int(dead[0]) + 1} has zero sum of squares")
    return (X.T @ Y) / denom[:, None]


def fit_fof(covariates: MfpcaModel, response: FpcaModel) -> FofModel:
    """Fit the score regression from the two models' training scores."""
    if covariates.days != response.days:
        raise ComputationError("covariate and response models were fit on different days")
    X = covariates.scores[:, :covariates.n_selected]
    Y = response.scores[:, :response.n_selected]
    b = fof_coefficients(X, Y)
    return FofModel(covariates, response, b, covariates.days)


def beta_surface(model: FofModel, variable: str, s_grid: np.ndarray,
                 t_grid: np.ndarray) -> CoefficientSurface:
    """Evaluate beta_k(s, t) = sum_lm b_lm psi_lk(s) psi_m(t) on a grid."""
    if variable not in model.covariates.variables:
        raise ComputationError(
            f"unknown covariate {variable!r}; model has {list(model.covariates.variables)}")
    s_grid = np.asarray(s_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    L, M = model.coefficients.shape
    Sx = eval_basis(model.covariates.basis, s_grid) @ model.covariates.block(variable, L).T
    Ty = eval_basis(model.response.basis, t_grid) @ model.response.eigenfunction_coefficients[:M].T
    return CoefficientSurface(variable, s_grid, t_grid, Sx @ model.coefficients @ Ty.T)


def predict_scores(model: FofModel, x_fvs: list[FunctionalVariable]) -> np.ndarray:
    """Predicted response scores for standardized covariate curves."""
    return mfpca_scores(model.covariates, x_fvs) @ model.coefficients


def predict_y(model: FofModel, x_fvs: list[FunctionalVariable]) -> FunctionalVariable:
    """Predicted response curves (standardized scale) for new covariate days."""
    xi_y = predict_scores(model, x_fvs)
    M = model.n_response_components
    coef = model.response.mean_coefficients + xi_y @ model.response.eigenfunction_coefficients[:M]
    return FunctionalVariable(model.response.basis, coef, x_fvs[0].days, "predicted_response")


def residuals(model: FofModel, y_fv: FunctionalVariable,
              x_fvs: list[FunctionalVariable]) -> list[FunctionalResidual]:
    """Functional residuals e_i = Y_i - Yhat_i on the standardized response scale."""
    if y_fv.days != x_fvs[0].days:
        raise ComputationError("response and covariate day labels differ")
    pred = predict_y(model, x_fvs)
    diff = y_fv.coefficients - pred.coefficients
    return [FunctionalResidual(day, diff[i]) for i, day in enumerate(y_fv.days)]


def residuals_variable(model: FofModel, y_fv: FunctionalVariable,
                       x_fvs: list[FunctionalVariable]) -> FunctionalVariable:
    """Residuals bundled as a FunctionalVariable over the response basis."""
    res = residuals(model, y_fv, x_fvs)
    coef = np.stack([r.coefficients for r in res])
    return FunctionalVariable(model.response.basis, coef, y_fv.days, "residual")


def surface_to_rows(surface: CoefficientSurface) -> list[tuple[float, float, float]]:
    """Flatten a surface to (s, t, value) rows for CSV export."""
    rows = []
    for i, s in enumerate(surface.s_grid):
        for j, t in enumerate(surface.t_grid):
            rows.append((float(s), float(t), float(surface.values[i, j])))
    return rows
