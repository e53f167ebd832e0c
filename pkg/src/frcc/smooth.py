"""Penalized spline smoothing of gridded profiles and pointwise standardization.

A profile y over observed grid points t is represented by basis coefficients
c minimizing ||y - B c||^2 + lambda * c' P c with P the integrated squared
second derivative penalty. Standardization divides curves pointwise by the
empirical standard deviation function on the standardization grid and
re-smooths into the basis, which makes covariates in different units
comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .basis import BasisSystem, eval_basis, greville_abscissae, second_derivative_penalty
from .errors import ComputationError
from .ingest import Profile

DEFAULT_LAMBDA_GRID = tuple(np.logspace(-4, 4, 25))
SD_FLOOR_FACTOR = 1e-8
MIN_OBS_FOR_SMOOTHING = 4


@dataclass(frozen=True)
class FunctionalVariable:
    """n observed curves of one variable as rows of a coefficient matrix."""

    basis: BasisSystem
    coefficients: np.ndarray
    days: tuple
    name: str

    def __post_init__(self):
        coef = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        if coef.shape[1] != self.basis.n_basis:
            raise ValueError(f"coefficient columns ({coef.shape[1]}) do not match basis "
                             f"dimension ({self.basis.n_basis})")
        if coef.shape[0] != len(self.days):
            raise ValueError("one coefficient row per day label required")
        if not np.all(np.isfinite(coef)):
            raise ValueError(f"non-finite coefficients in variable {self.name!r}")
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "days", tuple(self.days))

    @property
    def n_days(self) -> int:
        return self.coefficients.shape[0]

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """(n_days, len(t)) curve values."""
        return self.coefficients @ eval_basis(self.basis, t).T


@dataclass(frozen=True)
class StandardizationFunctions:
    """Training mean curve (coefficients) and SD curve (grid values)."""

    basis: BasisSystem
    mean_coefficients: np.ndarray
    grid: np.ndarray = field(repr=False)
    sd_values: np.ndarray = field(repr=False)

    def mean_values(self) -> np.ndarray:
        return eval_basis(self.basis, self.grid) @ self.mean_coefficients


def _observed_design(profile: Profile, basis: BasisSystem,
                     grid_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if profile.n_observed < MIN_OBS_FOR_SMOOTHING:
        raise ComputationError(
            f"profile ({profile.day}, {profile.variable}) has {profile.n_observed} "
            f"observed points; at least {MIN_OBS_FOR_SMOOTHING} required")
    t = grid_points[profile.observed]
    y = profile.values[profile.observed]
    return eval_basis(basis, t), y


def _penalty_root(penalty: np.ndarray) -> np.ndarray:
    """L with L'L = P, rows spanning only the positive-eigenvalue directions."""
    vals, vecs = np.linalg.eigh(0.5 * (penalty + penalty.T))
    top = float(vals.max(initial=0.0))
    keep = vals > 1e-14 * top if top > 0 else np.zeros(vals.shape, dtype=bool)
    return np.sqrt(vals[keep])[:, None] * vecs[:, keep].T


def penalized_smooth_values(B: np.ndarray, y: np.ndarray, penalty: np.ndarray,
                            lam: float) -> np.ndarray:
    """Minimize ||y - Bc||^2 + lam * c'Pc; minimum-norm solution when lam == 0.

    Solved as stacked least squares [B; sqrt(lam) L] c = [y; 0] with L'L = P,
    which stays accurate for very large lam where the normal equations lose
    half the digits.
    """
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    Y = np.atleast_2d(y)
    if lam == 0.0:
        coef = np.linalg.lstsq(B, Y.T, rcond=None)[0].T
    else:
        L = _penalty_root(penalty)
        A = np.vstack([B, np.sqrt(lam) * L])
        rhs = np.vstack([Y.T, np.zeros((L.shape[0], Y.shape[0]))])
        coef = np.linalg.lstsq(A, rhs, rcond=None)[0].T
    return coef[0] if np.ndim(y) == 1 else coef


def penalized_smooth(profile: Profile, basis: BasisSystem, lam: float,
                     grid_points: np.ndarray | None = None,
                     penalty: np.ndarray | None = None) -> np.ndarray:
    """Smooth one profile into a basis coefficient vector.

    Only observed grid points enter the fit. ``grid_points`` defaults to
    0..n-1 hour stamps matching the profile length; pass the profile set's
    grid abscissae in pipeline use.
    """
    if grid_points is None:
        grid_points = np.arange(len(profile.values), dtype=float)
    if penalty is None:
        penalty = second_derivative_penalty(basis)
    B, y = _observed_design(profile, basis, np.asarray(grid_points, dtype=float))
    return penalized_smooth_values(B, y, penalty, float(lam))


def _gcv_terms(B: np.ndarray, penalty: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """Hat-matrix application S = B (B'B + lam P)^-1 B' and its trace."""
    A = B.T @ B + lam * penalty
    try:
        AinvBt = scipy.linalg.solve(A, B.T, assume_a="pos")
    except np.linalg.LinAlgError:
        AinvBt = np.linalg.lstsq(A, B.T, rcond=None)[0]
    S = B @ AinvBt
    return S, float(np.trace(S))


def select_lambda_gcv(profile: Profile, basis: BasisSystem,
                      lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID,
                      grid_points: np.ndarray | None = None,
                      penalty: np.ndarray | None = None) -> float:
    """Grid minimizer of GCV(lam) = n * RSS / (n - tr H)^2 for one profile."""
    if grid_points is None:
        grid_points = np.arange(len(profile.values), dtype=float)
    if penalty is None:
        penalty = second_derivative_penalty(basis)
    grid = [float(l) for l in lambda_grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    B, y = _observed_design(profile, basis, np.asarray(grid_points, dtype=float))
    n = len(y)
    best_lam, best_score = None, np.inf
    for lam in grid:
        S, tr = _gcv_terms(B, penalty, lam)
        if tr >= n:
            continue
        rss = float(np.sum((y - S @ y) ** 2))
        score = n * rss / (n - tr) ** 2
        if score < best_score:
            best_lam, best_score = lam, score
    if best_lam is None:
        raise ComputationError(
            f"GCV degenerate: effective dof >= {n} observations for every lambda")
    return best_lam


def select_lambda_gcv_pooled(values: np.ndarray, basis: BasisSystem,
                             grid_points: np.ndarray,
                             lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID,
                             penalty: np.ndarray | None = None) -> float:
    """One lambda for a whole variable: pooled GCV over complete profiles.

    All rows of ``values`` must share the observation pattern (complete
    profiles on the common grid), so one hat matrix serves every day.
    """
    if penalty is None:
        penalty = second_derivative_penalty(basis)
    Y = np.atleast_2d(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(Y)):
        raise ComputationError("pooled GCV requires complete profiles")
    B = eval_basis(basis, np.asarray(grid_points, dtype=float))
    n_total = Y.size
    best_lam, best_score = None, np.inf
    for lam in [float(l) for l in lambda_grid]:
        S, tr = _gcv_terms(B, penalty, lam)
        df = tr * Y.shape[0]
        if df >= n_total:
            continue
        rss = float(np.sum((Y - Y @ S.T) ** 2))
        score = n_total * rss / (n_total - df) ** 2
        if score < best_score:
            best_lam, best_score = lam, score
    if best_lam is None:
        raise ComputationError("pooled GCV degenerate for every lambda on the grid")
    return best_lam


def smooth_variable(values: np.ndarray, days, name: str, basis: BasisSystem,
                    grid_points: np.ndarray, lam: float,
                    penalty: np.ndarray | None = None) -> FunctionalVariable:
    """Batch-smooth complete profiles (rows of ``values``) with a shared lambda."""
    if penalty is None:
        penalty = second_derivative_penalty(basis)
    Y = np.atleast_2d(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(Y)):
        raise ComputationError(f"variable {name!r} has missing values; reconstruct first")
    B = eval_basis(basis, np.asarray(grid_points, dtype=float))
    coef = penalized_smooth_values(B, Y, penalty, float(lam))
    return FunctionalVariable(basis, coef, tuple(days), name)


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

def standardization_grid(basis: BasisSystem) -> np.ndarray:
    """Default standardization grid: the basis's Greville collocation points.

    With exactly n_basis points the re-smoothing step is an interpolation, so
    the standardized curves keep pointwise mean 0 and SD 1 on this grid to
    floating-point accuracy instead of up to a spline approximation error.
    """
    return greville_abscissae(basis)


def dense_grid(basis: BasisSystem, n: int = 101) -> np.ndarray:
    lo, hi = basis.domain
    return np.linspace(lo, hi, n)


def _project_values(E: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Least-squares projection of grid values into the basis (rows).

    Exact interpolation when the grid is the Greville collocation grid.
    """
    return np.linalg.lstsq(E, np.atleast_2d(values).T, rcond=None)[0].T


def standardize(fv: FunctionalVariable,
                grid: np.ndarray | None = None) -> tuple[FunctionalVariable, StandardizationFunctions]:
    """Center and scale a functional variable pointwise on the standardization grid.

    Returns the standardized variable (re-smoothed into the same basis) and
    the mean/SD functions needed to standardize future data the same way.
    """
    if fv.n_days < 2:
        raise ComputationError(f"standardization needs at least 2 curves, got {fv.n_days}")
    if grid is None:
        grid = standardization_grid(fv.basis)
    grid = np.asarray(grid, dtype=float)
    E = eval_basis(fv.basis, grid)
    V = fv.coefficients @ E.T
    mean_vals = V.mean(axis=0)
    sd_vals = V.std(axis=0)
    floor = SD_FLOOR_FACTOR * float(sd_vals.max(initial=0.0))
    if floor <= 0.0 or np.any(sd_vals < floor):
        bad = int(np.argmin(sd_vals))
        raise ComputationError(
            f"variable {fv.name!r}: pointwise SD {sd_vals[bad]:.3e} at grid point "
            f"t={grid[bad]:g} is below the floor; cannot standardize")
    mean_coef = _project_values(E, mean_vals)[0]
    Z = (V - mean_vals) / sd_vals
    coef_std = _project_values(E, Z)
    sf = StandardizationFunctions(fv.basis, mean_coef, grid, sd_vals)
    return FunctionalVariable(fv.basis, coef_std, fv.days, fv.name), sf


def standardize_with(fv: FunctionalVariable, sf: StandardizationFunctions) -> FunctionalVariable:
    """Apply previously fitted standardization functions to new curves."""
    if fv.basis != sf.basis:
        raise ComputationError("basis mismatch between variable and standardization functions")
    E = eval_basis(fv.basis, sf.grid)
    V = fv.coefficients @ E.T
    Z = (V - sf.mean_values()) / sf.sd_values
    return FunctionalVariable(fv.basis, _project_values(E, Z), fv.days, fv.name)


def unstandardize(fv: FunctionalVariable, sf: StandardizationFunctions) -> FunctionalVariable:
    """Map standardized curves back to the original scale."""
    if fv.basis != sf.basis:
        raise ComputationError("basis mismatch between variable and standardization functions")
    E = eval_basis(fv.basis, sf.grid)
    Z = fv.coefficients @ E.T
    V = Z * sf.sd_values + sf.mean_values()
    return FunctionalVariable(fv.basis, _project_values(E, V), fv.days, fv.name)
