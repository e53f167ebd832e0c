import numpy as np
import pytest
from math import comb

from frcc.basis import (basis_integrals, eval_basis, gram_matrix, greville_abscissae,
                        make_bspline_basis, quadrature_rule, second_derivative_penalty)
from conftest import deboor_value, trapezoid_weights


class TestConstruction:
    def test_default_dimensions(self, basis30):
        assert basis30.n_basis == 30
        assert basis30.n_interior_knots == 26
        assert len(basis30.knots) == 34
        assert np.allclose(np.diff(basis30.interior_knots),
                           basis30.interior_knots[1] - basis30.interior_knots[0])

    def test_clamped_boundary_knots(self, basis30):
        assert np.all(basis30.knots[:4] == 0.0)
        assert np.all(basis30.knots[-4:] == 24.0)

    def test_clamped_endpoint_values(self, basis30):
        left = eval_basis(basis30, np.array([0.0]))[0]
        right = eval_basis(basis30, np.array([24.0]))[0]
        assert left[0] == pytest.approx(1.0, abs=1e-14)
        assert np.all(left[1:] < 1e-14)
        assert right[-1] == pytest.approx(1.0, abs=1e-14)

    def test_n_basis_below_order_rejected(self):
        with pytest.raises(ValueError):
            make_bspline_basis((0, 1), 3, 4)

    def test_degenerate_domain_rejected(self):
        with pytest.raises(ValueError):
            make_bspline_basis((2.0, 2.0), 10, 4)

    def test_bernstein_special_case(self):
        # n_basis == order: single polynomial segment, the Bernstein basis
        basis = make_bspline_basis((0.0, 1.0), 4, 4)
        x = np.linspace(0.0, 1.0, 47)
        B = eval_basis(basis, x)
        for i in range(4):
            expected = comb(3, i) * x**i * (1.0 - x) ** (3 - i)
            np.testing.assert_allclose(B[:, i], expected, atol=1e-13)

    def test_greville_points(self, basis30):
        g = greville_abscissae(basis30)
        assert g[0] == 0.0 and g[-1] == 24.0
        assert np.all(np.diff(g) > 0)


class TestEvaluation:
    def test_partition_of_unity(self, basis30):
        rng = np.random.default_rng(1)
        t = rng.uniform(0.0, 24.0, 1000)
        B = eval_basis(basis30, t)
        assert np.abs(B.sum(axis=1) - 1.0).max() < 1e-12

    def test_nonnegative_and_local_support(self, basis30):
        rng = np.random.default_rng(2)
        B = eval_basis(basis30, rng.uniform(0, 24, 200))
        assert B.min() >= 0.0
        assert int((B > 1e-14).sum(axis=1).max()) <= basis30.order

    def test_outside_domain_rejected(self, basis30):
        with pytest.raises(ValueError):
            eval_basis(basis30, np.array([24.0001]))
        with pytest.raises(ValueError):
            eval_basis(basis30, np.array([-0.1]))

    def test_continuity_at_interior_knot(self, basis30):
        knot = basis30.interior_knots[10]
        eps = 1e-9
        left = eval_basis(basis30, np.array([knot - eps]))
        right = eval_basis(basis30, np.array([knot + eps]))
        # order-4 splines are C^2, so values match to O(eps)
        assert np.abs(left - right).max() < 1e-7

    def test_matches_naive_deboor_recursion(self, basis30):
        rng = np.random.default_rng(3)
        t = rng.uniform(0.001, 23.999, 25)
        B = eval_basis(basis30, t)
        for j, x in enumerate(t):
            oracle = [deboor_value(basis30.knots, 3, i, x) for i in range(30)]
            np.testing.assert_allclose(B[j], oracle, atol=1e-13)


class TestGram:
    def test_all_ones_quadratic_form_is_domain_length(self, basis30):
        W = gram_matrix(basis30)
        ones = np.ones(30)
        assert ones @ W @ ones == pytest.approx(24.0, rel=1e-12)

    def test_matches_fine_trapezoid_oracle(self, basis30):
        # trapezoid is O(h^2); the grid must be fine enough that the oracle's
        # own error sits below the 1e-8 comparison tolerance
        t = np.linspace(0.0, 24.0, 400001)
        B = eval_basis(basis30, t)
        w = trapezoid_weights(t)
        W_oracle = B.T @ (w[:, None] * B)
        assert np.abs(gram_matrix(basis30) - W_oracle).max() < 1e-8

    def test_banded_structure(self, basis30):
        W = gram_matrix(basis30)
        j, k = np.meshgrid(np.arange(30), np.arange(30), indexing="ij")
        assert np.all(W[np.abs(j - k) >= basis30.order] == 0.0)

    def test_symmetric_positive_definite(self, basis30):
        W = gram_matrix(basis30)
        assert np.abs(W - W.T).max() < 1e-10
        assert np.linalg.eigvalsh(W).min() > 0.0

    def test_basis_integrals_are_row_sums(self, basis30):
        v = basis_integrals(basis30)
        assert v.sum() == pytest.approx(24.0, rel=1e-12)
        assert np.all(v > 0)


class TestPenalty:
    def test_constant_in_null_space(self, basis30):
        P = second_derivative_penalty(basis30)
        c = np.ones(30)
        assert abs(c @ P @ c) < 1e-10

    def test_linear_in_null_space(self, basis30):
        # a linear function has B-spline coefficients equal to the Greville values
        P = second_derivative_penalty(basis30)
        c = 2.0 * greville_abscissae(basis30) - 5.0
        assert abs(c @ P @ c) < 1e-10

    def test_random_spline_roughness_vs_quadrature(self, basis30):
        rng = np.random.default_rng(4)
        c = rng.standard_normal(30)
        P = second_derivative_penalty(basis30)
        # f'' of a cubic spline is piecewise linear with kinks, so the O(h^2)
        # trapezoid needs a fine grid before its own error drops under 1e-6
        t = np.linspace(0.0, 24.0, 100001)
        d2 = eval_basis(basis30, t, deriv=2) @ c
        oracle = float(np.trapezoid(d2**2, t))
        assert c @ P @ c == pytest.approx(oracle, rel=1e-6)

    def test_symmetric_psd(self, basis30):
        P = second_derivative_penalty(basis30)
        assert np.abs(P - P.T).max() < 1e-10
        assert np.linalg.eigvalsh(P).min() > -1e-10

    def test_order_two_rejected(self):
        basis = make_bspline_basis((0, 24), 10, 2)
        with pytest.raises(ValueError):
            second_derivative_penalty(basis)


class TestQuadrature:
    def test_rule_integrates_spline_products_exactly(self, basis30):
        nodes, weights = quadrature_rule(basis30)
        rng = np.random.default_rng(5)
        c1, c2 = rng.standard_normal((2, 30))
        B = eval_basis(basis30, nodes)
        approx = float(np.sum(weights * (B @ c1) * (B @ c2)))
        W = gram_matrix(basis30)
        assert approx == pytest.approx(float(c1 @ W @ c2), rel=1e-12)
