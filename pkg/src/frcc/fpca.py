"""Univariate functional PCA and FPCA-based recovery of partially observed profiles.

The eigenproblem is solved in coefficient space: with centered coefficients C
and Gram matrix W, the operator (1/(n-1)) W^{1/2} C'C W^{1/2} shares
eigenvalues with the covariance operator, and eigenfunction coefficients are
W^{-1/2} times its eigenvectors. This is exact under the basis representation
and keeps the problem at basis dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import (BasisSystem, basis_integrals, eval_basis, gram_matrix,
                    make_bspline_basis, second_derivative_penalty)
from .errors import ComputationError
from .smooth import FunctionalVariable

SIGN_TIE_TOL = 1e-10


def _symmetric_sqrt(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric square root and inverse square root of an SPD matrix."""
    vals, vecs = np.linalg.eigh(0.5 * (W + W.T))
    if vals.min() <= 0:
        raise ComputationError("Gram matrix is not positive definite")
    root = vecs @ np.diag(np.sqrt(vals)) @ vecs.T
    inv_root = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.T
    return root, inv_root


def _fix_signs(eigenfunction_coefficients: np.ndarray, integrals: np.ndarray) -> np.ndarray:
    """Deterministic sign: integral of each eigenfunction >= 0, coefficient tiebreak."""
    out = eigenfunction_coefficients.copy()
    scale = max(float(np.abs(out).max(initial=0.0)), 1.0)
    for r in range(out.shape[0]):
        total = float(out[r] @ integrals)
        if abs(total) > SIGN_TIE_TOL * scale:
            sign = np.sign(total)
        else:
            nz = np.nonzero(np.abs(out[r]) > SIGN_TIE_TOL * scale)[0]
            sign = np.sign(out[r][nz[0]]) if nz.size else 1.0
        out[r] *= sign
    return out


def choose_ncomp(eigenvalues: np.ndarray, threshold: float) -> int:
    """Smallest R whose cumulative explained-variance ratio reaches the threshold."""
    ev = np.asarray(eigenvalues, dtype=float)
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"variance threshold must be in (0, 1], got {threshold}")
    if np.any(ev < -1e-12 * max(ev.max(initial=0.0), 1.0)):
        raise ValueError("eigenvalues must be nonnegative")
    if np.any(np.diff(ev) > 1e-12 * max(ev.max(initial=0.0), 1.0)):
        raise ValueError("eigenvalues must be nonincreasing")
    total = float(ev.sum())
    if total <= 0.0:
        raise ValueError("all eigenvalues are zero")
    ratios = np.cumsum(ev) / total
    return int(np.searchsorted(ratios, threshold - 1e-12) + 1)


@dataclass(frozen=True)
class FpcaModel:
    """Fitted FPCA: eigenfunctions in coefficient form plus training scores."""

    basis: BasisSystem
    mean_coefficients: np.ndarray
    eigenfunction_coefficients: np.ndarray   # (R_max, n_basis)
    eigenvalues: np.ndarray                  # nonincreasing, >= 0
    scores: np.ndarray                       # (n_days, R_max)
    explained_variance_ratio: np.ndarray
    n_selected: int
    days: tuple = ()
    gram: np.ndarray = field(repr=False, default=None)

    @property
    def selected_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[:self.n_selected]

    @property
    def selected_eigenfunctions(self) -> np.ndarray:
        return self.eigenfunction_coefficients[:self.n_selected]

    def eigenfunction_values(self, t: np.ndarray, r: int | None = None) -> np.ndarray:
        E = eval_basis(self.basis, t)
        coef = self.eigenfunction_coefficients if r is None else self.eigenfunction_coefficients[r:r + 1]
        return coef @ E.T


def fit_fpca(fv: FunctionalVariable, variance_threshold: float = 0.95) -> FpcaModel:
    """Fit FPCA to a functional variable; components chosen by explained variance.

    Degenerate data (all curves identical) yields all-zero eigenvalues,
    zero ratios, and a single selected component.
    """
    if not 0.0 < variance_threshold <= 1.0:
        raise ValueError(f"variance threshold must be in (0, 1], got {variance_threshold}")
    if fv.n_days < 2:
        raise ComputationError(f"FPCA needs at least 2 curves, got {fv.n_days}")
    W = gram_matrix(fv.basis)
    root, inv_root = _symmetric_sqrt(W)
    mean = fv.coefficients.mean(axis=0)
    C = fv.coefficients - mean
    n = fv.n_days
    M = root @ (C.T @ C / (n - 1)) @ root
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(vals)[::-1]
    r_max = min(n - 1, fv.basis.n_basis)
    vals = np.clip(vals[order][:r_max], 0.0, None)
    psi = _fix_signs((inv_root @ vecs[:, order][:, :r_max]).T, basis_integrals(fv.basis))
    scores = C @ W @ psi.T
    total = float(vals.sum())
    # identical curves leave only rounding noise in the centered coefficients;
    # report that as an exactly degenerate spectrum
    data_scale = float(np.sum(fv.coefficients**2)) + 1.0
    if total > 1e-20 * data_scale:
        ratios = vals / total
        n_selected = choose_ncomp(vals, variance_threshold)
    else:
        vals = np.zeros_like(vals)
        ratios = np.zeros_like(vals)
        n_selected = 1
    return FpcaModel(fv.basis, mean, psi, vals, scores, ratios, n_selected,
                     days=fv.days, gram=W)


def project_scores(model: FpcaModel, fv: FunctionalVariable) -> np.ndarray:
    """Scores of new curves on the selected eigenfunctions (Gram inner products)."""
    if fv.basis != model.basis:
        raise ComputationError("basis mismatch between model and new curves")
    W = model.gram if model.gram is not None else gram_matrix(model.basis)
    C = fv.coefficients - model.mean_coefficients
    return C @ W @ model.selected_eigenfunctions.T


# ---------------------------------------------------------------------------
# Reconstruction of partially observed profiles (pre-smoothing step)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridReconstructionModel:
    """Grid-level PCA model used to fill missing points of daily profiles."""

    grid: np.ndarray
    mean_values: np.ndarray
    components: np.ndarray      # (R, n_points), orthonormal rows
    eigenvalues: np.ndarray     # (R,), positive
    noise_variance: float

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def _grid_smoother(grid: np.ndarray, lam: float) -> np.ndarray:
    """Penalized-spline hat matrix on a grid, used to denoise moment estimates."""
    n_basis = int(min(len(grid), 30))
    basis = make_bspline_basis((float(grid[0]), float(grid[-1])), n_basis, 4)
    B = eval_basis(basis, grid)
    P = second_derivative_penalty(basis)
    return B @ np.linalg.solve(B.T @ B + lam * P, B.T)


def fit_reconstruction(values: np.ndarray, observed: np.ndarray, grid: np.ndarray,
                       variance_threshold: float = 0.95,
                       smoothing_lambda: float = 0.5) -> GridReconstructionModel:
    """Fit the grid-space PCA model for profile recovery.

    Mean and covariance come from pairwise-complete observations and are then
    lightly spline-smoothed (covariance in sandwich form H S H'), which
    suppresses the pairwise estimation noise that otherwise leaks into the
    eigenvectors. The noise variance is the mean squared residual of observed
    points after projection on the selected components.
    """
    Y = np.asarray(values, dtype=float)
    O = np.asarray(observed, dtype=bool)
    if Y.shape != O.shape or Y.ndim != 2:
        raise ValueError("values and observed must be equal-shape 2-D arrays")
    n, p = Y.shape
    counts = O.sum(axis=0)
    if np.any(counts < 2):
        bad = int(np.argmin(counts))
        raise ComputationError(
            f"grid point {grid[bad]:g} observed on {counts[bad]} day(s); "
            "at least 2 needed to estimate the covariance")
    D = np.where(O, Y, 0.0)
    mean = D.sum(axis=0) / counts
    Dc = np.where(O, Y - mean, 0.0)
    pair_counts = O.astype(float).T @ O.astype(float)
    S = (Dc.T @ Dc) / np.maximum(pair_counts - 1.0, 1.0)
    S[pair_counts < 2] = 0.0
    if smoothing_lambda > 0.0 and p > 4:
        H = _grid_smoother(np.asarray(grid, dtype=float), smoothing_lambda)
        mean = H @ mean
        S = H @ S @ H.T
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    if vals[0] <= 0.0:
        raise ComputationError("reconstruction failed: no positive variance component")
    r = choose_ncomp(vals, variance_threshold)
    r = min(r, int(np.sum(vals > 1e-12 * vals[0])))
    comps = vecs[:, :r].T
    # deterministic sign: largest-magnitude entry positive
    for i in range(r):
        j = int(np.argmax(np.abs(comps[i])))
        if comps[i, j] < 0:
            comps[i] *= -1.0
    # noise level from per-profile least-squares residuals on observed points
    sq_sum, n_pts = 0.0, 0
    for i in range(n):
        o = O[i]
        if o.sum() <= r:
            continue
        Phi = comps[:, o].T
        dev = Y[i, o] - mean[o]
        xi = np.linalg.lstsq(Phi, dev, rcond=None)[0]
        resid = dev - Phi @ xi
        sq_sum += float(resid @ resid)
        n_pts += int(o.sum())
    noise = sq_sum / n_pts if n_pts else 0.0
    return GridReconstructionModel(np.asarray(grid, dtype=float), mean, comps,
                                   vals[:r], noise)


def reconstruct_scores(model: GridReconstructionModel, values_row: np.ndarray,
                       observed_row: np.ndarray) -> np.ndarray:
    """Ridge-regularized scores (conditional-expectation form) for one profile."""
    o = np.asarray(observed_row, dtype=bool)
    Phi = model.components[:, o].T
    dev = values_row[o] - model.mean_values[o]
    r = model.n_components
    ridge = np.sqrt(model.noise_variance / model.eigenvalues)
    A = np.vstack([Phi, np.diag(ridge)])
    b = np.concatenate([dev, np.zeros(r)])
    return np.linalg.lstsq(A, b, rcond=None)[0]


def reconstruct_sparse(values: np.ndarray, observed: np.ndarray,
                       model: GridReconstructionModel,
                       min_obs: int = 4) -> np.ndarray:
    """Fill missing grid points of each profile; observed points are kept.

    Each row's scores come from ridge-regularized least squares of its
    observed deviations on the component values at observed points, and the
    model expansion fills only the unobserved cells.
    """
    if model.n_components < 1:
        raise ComputationError("reconstruction model has no components")
    Y = np.array(values, dtype=float)
    O = np.asarray(observed, dtype=bool)
    for i in range(Y.shape[0]):
        n_obs = int(O[i].sum())
        if n_obs == O.shape[1]:
            continue
        if n_obs < min_obs:
            raise ComputationError(
                f"profile row {i} has {n_obs} observed points; at least {min_obs} required")
        xi = reconstruct_scores(model, Y[i], O[i])
        fitted = model.mean_values + xi @ model.components
        Y[i, ~O[i]] = fitted[~O[i]]
    return Y
