"""Multivariate functional PCA of standardized functional covariates.

Coefficients of the p variables are concatenated blockwise; the common Gram
matrix enters each block, so the multivariate eigenproblem stays a dense
symmetric problem of size p * n_basis. Scores are sums over variables of
Gram-weighted inner products with the eigenfunction blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSystem, basis_integrals, gram_matrix
from .errors import ComputationError
from .fpca import _fix_signs, _symmetric_sqrt, choose_ncomp
from .smooth import FunctionalVariable


@dataclass(frozen=True)
class MfpcaModel:
    """Fitted multivariate FPCA over p variables sharing one basis."""

    variables: tuple[str, ...]
    basis: BasisSystem
    mean_coefficients: np.ndarray            # (p, n_basis)
    eigenfunction_coefficients: np.ndarray   # (L_max, p, n_basis)
    eigenvalues: np.ndarray
    scores: np.ndarray                       # (n_days, L_max)
    explained_variance_ratio: np.ndarray
    n_selected: int
    days: tuple = ()
    gram: np.ndarray = field(repr=False, default=None)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def selected_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[:self.n_selected]

    def block(self, variable: str, upto: int | None = None) -> np.ndarray:
        """Eigenfunction coefficients for one variable, (L, n_basis)."""
        k = self.variables.index(variable)
        upto = self.n_selected if upto is None else upto
        return self.eigenfunction_coefficients[:upto, k, :]


def _check_aligned(fvs: list[FunctionalVariable]) -> None:
    if not fvs:
        raise ComputationError("no functional variables given")
    basis = fvs[0].basis
    days = fvs[0].days
    for fv in fvs[1:]:
        if fv.basis != basis:
            raise ComputationError(f"variable {fv.name!r} uses a different basis")
        if fv.days != days:
            raise ComputationError(
                f"variable {fv.name!r} day labels differ from {fvs[0].name!r}")


def fit_mfpca(fvs: list[FunctionalVariable], variance_threshold: float = 0.95) -> MfpcaModel:
    """Fit multivariate FPCA to p aligned, standardized functional variables."""
    if not 0.0 < variance_threshold <= 1.0:
        raise ValueError(f"variance threshold must be in (0, 1], got {variance_threshold}")
    _check_aligned(fvs)
    n = fvs[0].n_days
    if n < 2:
        raise ComputationError(f"MFPCA needs at least 2 days, got {n}")
    basis = fvs[0].basis
    p, K = len(fvs), basis.n_basis
    W = gram_matrix(basis)
    root, inv_root = _symmetric_sqrt(W)
    means = np.stack([fv.coefficients.mean(axis=0) for fv in fvs])
    Z = np.hstack([(fv.coefficients - means[k]) @ root for k, fv in enumerate(fvs)])
    M = Z.T @ Z / (n - 1)
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(vals)[::-1]
    l_max = min(n - 1, p * K)
    vals = np.clip(vals[order][:l_max], 0.0, None)
    V = vecs[:, order][:, :l_max]
    blocks = np.stack([(inv_root @ V[k * K:(k + 1) * K, :]).T for k in range(p)], axis=1)
    # multivariate sign rule: summed integral over blocks nonnegative
    w_int = basis_integrals(basis)
    flat = _fix_signs(blocks.reshape(l_max, p * K), np.tile(w_int, p))
    blocks = flat.reshape(l_max, p, K)
    scores = sum(
        (fv.coefficients - means[k]) @ W @ blocks[:, k, :].T for k, fv in enumerate(fvs)
    )
    total = float(vals.sum())
    if total > 0.0:
        ratios = vals / total
        n_selected = choose_ncomp(vals, variance_threshold)
    else:
        ratios = np.zeros_like(vals)
        n_selected = 1
    return MfpcaModel(tuple(fv.name for fv in fvs), basis, means, blocks, vals,
                      scores, ratios, n_selected, days=fvs[0].days, gram=W)


def mfpca_scores(model: MfpcaModel, fvs: list[FunctionalVariable]) -> np.ndarray:
    """Scores of new days on the selected multivariate eigenfunctions.

    Inputs must be standardized with the training standardization functions
    and supplied in any order covering exactly the model's variables.
    """
    names = tuple(fv.name for fv in fvs)
    if sorted(names) != sorted(model.variables):
        raise ComputationError(
            f"variable mismatch: model has {list(model.variables)}, got {list(names)}")
    by_name = {fv.name: fv for fv in fvs}
    ordered = [by_name[v] for v in model.variables]
    _check_aligned(ordered)
    if ordered[0].basis != model.basis:
        raise ComputationError("basis mismatch between model and new curves")
    W = model.gram if model.gram is not None else gram_matrix(model.basis)
    L = model.n_selected
    return sum(
        (fv.coefficients - model.mean_coefficients[k]) @ W @ model.eigenfunction_coefficients[:L, k, :].T
        for k, fv in enumerate(ordered)
    )
