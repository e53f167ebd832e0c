import numpy as np
import pytest

from frcc.basis import gram_matrix, quadrature_rule
from frcc.errors import ComputationError
from frcc.fpca import (GridReconstructionModel, choose_ncomp, fit_fpca,
                       fit_reconstruction, project_scores, reconstruct_sparse)
from frcc.smooth import FunctionalVariable, smooth_variable
from conftest import random_smooth_fv


def grid_space_eigendecomposition(fv, n_nodes=8):
    """Brute-force oracle: eigenproblem of the quadrature-weighted pointwise
    covariance of the curves evaluated on a dense quadrature grid."""
    nodes, weights = quadrature_rule(fv.basis, n_nodes)
    V = fv.evaluate(nodes)
    Vc = V - V.mean(axis=0)
    S = Vc.T @ Vc / (fv.n_days - 1)
    D = np.sqrt(weights)
    vals, vecs = np.linalg.eigh(D[:, None] * S * D[None, :])
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    funcs = (vecs[:, order] / D[:, None]).T   # rows: eigenfunction values at nodes
    return vals, funcs, nodes


class TestChooseNcomp:
    def test_just_below_threshold_needs_two(self):
        assert choose_ncomp(np.array([9.0, 1.0]), 0.95) == 2

    def test_exactly_at_threshold_needs_one(self):
        assert choose_ncomp(np.array([19.0, 1.0]), 0.95) == 1

    def test_threshold_one_takes_support(self):
        assert choose_ncomp(np.array([3.0, 1.0, 0.0]), 1.0) <= 2

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            choose_ncomp(np.array([1.0, 2.0]), 0.95)
        with pytest.raises(ValueError):
            choose_ncomp(np.array([0.0, 0.0]), 0.95)
        with pytest.raises(ValueError):
            choose_ncomp(np.array([1.0]), 1.5)


class TestFitFpca:
    def test_identical_curves_degenerate(self, basis30):
        coef = np.tile(np.linspace(0.0, 3.0, 30), (6, 1))
        fv = FunctionalVariable(basis30, coef, tuple(range(6)), "flat")
        model = fit_fpca(fv, 0.95)
        assert np.all(model.eigenvalues < 1e-20)
        assert model.n_selected == 1
        assert np.all(model.explained_variance_ratio == 0.0)

    def test_rank_one_structure(self, basis30):
        rng = np.random.default_rng(20)
        phi = np.sin(np.linspace(0.2, 2.8, 30)) + 1.2
        c = rng.standard_normal(15)
        fv = FunctionalVariable(basis30, np.outer(c, phi), tuple(range(15)), "r1")
        model = fit_fpca(fv, 0.95)
        assert model.eigenvalues[0] > 0
        assert np.all(model.eigenvalues[1:] < 1e-10 * model.eigenvalues[0])
        W = gram_matrix(basis30)
        norm = np.sqrt(phi @ W @ phi)
        np.testing.assert_allclose(model.eigenfunction_coefficients[0], phi / norm,
                                   atol=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_grid_space_oracle(self, basis30, seed):
        rng = np.random.default_rng(100 + seed)
        grid24 = np.arange(24.0)
        Y = (2.0 + np.cumsum(rng.standard_normal((20, 4)), axis=1) @
             np.stack([np.sin(2 * np.pi * (r + 1) * grid24 / 24) for r in range(4)]))
        fv = smooth_variable(Y, tuple(range(20)), "x", basis30, grid24, 1e-6)
        model = fit_fpca(fv, 0.95)
        vals, funcs, nodes = grid_space_eigendecomposition(fv)
        keep = vals > 1e-9 * vals[0]
        np.testing.assert_allclose(model.eigenvalues[:keep.sum()], vals[keep],
                                   rtol=1e-6)
        for r in range(int(keep.sum())):
            mine = model.eigenfunction_values(nodes, r)[0]
            scale = np.abs(funcs[r]).max()
            if np.abs(mine - funcs[r]).max() > np.abs(mine + funcs[r]).max():
                mine = -mine
            np.testing.assert_allclose(mine, funcs[r], atol=1e-6 * scale)

    def test_orthonormal_eigenfunctions(self, basis30):
        fv = random_smooth_fv(basis30, 20, seed=21)
        model = fit_fpca(fv, 0.95)
        W = gram_matrix(basis30)
        G = model.eigenfunction_coefficients @ W @ model.eigenfunction_coefficients.T
        assert np.abs(G - np.eye(G.shape[0])).max() < 1e-8

    def test_score_means_zero(self, basis30):
        fv = random_smooth_fv(basis30, 20, seed=22)
        model = fit_fpca(fv, 0.95)
        assert np.abs(model.scores.mean(axis=0)).max() < 1e-8

    def test_score_covariance_diagonal(self, basis30):
        fv = random_smooth_fv(basis30, 30, seed=23)
        model = fit_fpca(fv, 0.95)
        C = model.scores.T @ model.scores / (fv.n_days - 1)
        off = C - np.diag(np.diag(C))
        assert np.abs(off).max() < 1e-6 * model.eigenvalues[0]
        np.testing.assert_allclose(np.diag(C), model.eigenvalues, atol=1e-8)

    def test_total_variance_preserved(self, basis30):
        fv = random_smooth_fv(basis30, 30, seed=24)
        model = fit_fpca(fv, 0.95)
        nodes, weights = quadrature_rule(basis30, 8)
        V = fv.evaluate(nodes)
        pointwise_var = V.var(axis=0, ddof=1)
        integrated = float(np.sum(weights * pointwise_var))
        assert model.eigenvalues.sum() == pytest.approx(integrated, rel=1e-6)

    def test_truncation_error_monotone(self, basis30):
        fv = random_smooth_fv(basis30, 30, seed=25)
        model = fit_fpca(fv, 0.95)
        W = gram_matrix(basis30)
        C = fv.coefficients - model.mean_coefficients
        errs = []
        for r in range(0, 7):
            psi = model.eigenfunction_coefficients[:r]
            recon = model.scores[:, :r] @ psi if r else np.zeros_like(C)
            diff = C - recon
            errs.append(float(np.einsum("ij,jk,ik->", diff, W, diff)))
        assert np.all(np.diff(errs) <= 1e-9)

    def test_refit_bit_identical(self, basis30):
        fv = random_smooth_fv(basis30, 20, seed=26)
        m1 = fit_fpca(fv, 0.95)
        m2 = fit_fpca(fv, 0.95)
        assert np.array_equal(m1.eigenfunction_coefficients, m2.eigenfunction_coefficients)
        assert np.array_equal(m1.eigenvalues, m2.eigenvalues)

    def test_sign_convention_nonnegative_integral(self, basis30):
        from frcc.basis import basis_integrals
        fv = random_smooth_fv(basis30, 20, seed=27)
        model = fit_fpca(fv, 0.95)
        w = basis_integrals(basis30)
        ints = model.eigenfunction_coefficients[:model.n_selected] @ w
        assert np.all(ints >= -1e-9)

    def test_bad_threshold_rejected(self, basis30):
        fv = random_smooth_fv(basis30, 10, seed=28)
        with pytest.raises(ValueError):
            fit_fpca(fv, 1.2)
        with pytest.raises(ValueError):
            fit_fpca(fv, 0.0)


class TestProjectScores:
    def test_training_scores_reproduced(self, basis30):
        fv = random_smooth_fv(basis30, 20, seed=30)
        model = fit_fpca(fv, 0.95)
        sc = project_scores(model, fv)
        np.testing.assert_allclose(sc, model.scores[:, :model.n_selected], atol=1e-10)

    def test_mean_curve_scores_zero(self, basis30):
        fv = random_smooth_fv(basis30, 20, seed=31)
        model = fit_fpca(fv, 0.95)
        mean_fv = FunctionalVariable(basis30, model.mean_coefficients[None, :], (0,), "m")
        assert np.abs(project_scores(model, mean_fv)).max() < 1e-10

    def test_mean_plus_eigenfunction_unit_score(self, basis30):
        fv = random_smooth_fv(basis30, 20, seed=32)
        model = fit_fpca(fv, 0.95)
        coef = model.mean_coefficients + model.eigenfunction_coefficients[0]
        one = FunctionalVariable(basis30, coef[None, :], (0,), "e1")
        sc = project_scores(model, one)[0]
        expected = np.zeros(model.n_selected)
        expected[0] = 1.0
        np.testing.assert_allclose(sc, expected, atol=1e-8)


class TestReconstruction:
    def _two_component_data(self, n, seed, noise_sd, missing_frac):
        rng = np.random.default_rng(seed)
        grid = np.arange(24.0)
        phi = np.stack([np.sin(2 * np.pi * grid / 24.0),
                        np.cos(4 * np.pi * grid / 24.0)])
        scores = rng.standard_normal((n, 2)) * np.array([2.0, 0.8])
        clean = 10.0 + scores @ phi
        noisy = clean + noise_sd * rng.standard_normal(clean.shape)
        observed = rng.random(clean.shape) >= missing_frac
        # honor the minimum-observation contract
        for i in range(n):
            while observed[i].sum() < 4:
                observed[i, rng.integers(0, 24)] = True
        return grid, clean, noisy, observed

    def test_fully_observed_passes_through(self):
        grid, _, noisy, _ = self._two_component_data(30, 40, 0.1, 0.0)
        observed = np.ones_like(noisy, dtype=bool)
        model = fit_reconstruction(noisy, observed, grid, 0.95)
        filled = reconstruct_sparse(noisy, observed, model)
        assert np.array_equal(filled, noisy)

    def test_observed_points_kept_missing_filled(self):
        grid, _, noisy, observed = self._two_component_data(40, 41, 0.1, 0.3)
        masked = np.where(observed, noisy, np.nan)
        model = fit_reconstruction(masked, observed, grid, 0.95)
        filled = reconstruct_sparse(masked, observed, model)
        assert np.array_equal(filled[observed], noisy[observed])
        assert np.all(np.isfinite(filled))

    def test_masked_rmse_within_twice_noise_sd(self):
        # enough days that the pairwise-complete covariance is estimated well;
        # the bound is on recovery quality, not on small-sample estimation
        noise_sd = 0.1
        grid, clean, noisy, observed = self._two_component_data(200, 42, noise_sd, 0.3)
        masked = np.where(observed, noisy, np.nan)
        model = fit_reconstruction(masked, observed, grid, 0.95)
        filled = reconstruct_sparse(masked, observed, model)
        err = filled[~observed] - clean[~observed]
        rmse = float(np.sqrt(np.mean(err**2)))
        assert rmse <= 2.0 * noise_sd

    def test_too_few_observed_rejected(self):
        grid, _, noisy, observed = self._two_component_data(30, 43, 0.1, 0.2)
        model = fit_reconstruction(noisy, np.ones_like(observed), grid, 0.95)
        bad_obs = np.ones_like(observed)
        bad_obs[0, :] = False
        bad_obs[0, :3] = True
        with pytest.raises(ComputationError):
            reconstruct_sparse(np.where(bad_obs, noisy, np.nan), bad_obs, model)

    def test_zero_component_model_rejected(self):
        grid = np.arange(24.0)
        model = GridReconstructionModel(grid, np.zeros(24), np.zeros((0, 24)),
                                        np.zeros(0), 0.0)
        values = np.ones((2, 24))
        observed = np.ones((2, 24), dtype=bool)
        observed[0, 5] = False
        with pytest.raises(ComputationError):
            reconstruct_sparse(values, observed, model)

    def test_degenerate_flat_data_rejected(self):
        grid = np.arange(24.0)
        values = np.ones((6, 24)) * 3.0
        observed = np.ones((6, 24), dtype=bool)
        with pytest.raises(ComputationError):
            fit_reconstruction(values, observed, grid, 0.95)
