"""Shared helpers: independent oracles and synthetic data builders."""

import numpy as np
import pytest

from frcc.basis import make_bspline_basis
from frcc.smooth import FunctionalVariable


def default_basis():
    return make_bspline_basis((0.0, 24.0), 30, 4)


def deboor_value(knots, degree, i, x):
    """Naive Cox-de Boor recursion for one basis function (oracle)."""
    if degree == 0:
        return 1.0 if knots[i] <= x < knots[i + 1] else 0.0
    left = 0.0
    if knots[i + degree] != knots[i]:
        left = (x - knots[i]) / (knots[i + degree] - knots[i]) * deboor_value(knots, degree - 1, i, x)
    right = 0.0
    if knots[i + degree + 1] != knots[i + 1]:
        right = ((knots[i + degree + 1] - x) / (knots[i + degree + 1] - knots[i + 1])
                 * deboor_value(knots, degree - 1, i + 1, x))
    return left + right


def trapezoid_weights(t):
    """Quadrature weights of the composite trapezoid rule on a sorted grid."""
    t = np.asarray(t, dtype=float)
    w = np.zeros_like(t)
    d = np.diff(t)
    w[:-1] += d / 2.0
    w[1:] += d / 2.0
    return w


def random_smooth_fv(basis, n_days, seed, scale=1.0, name="x"):
    """Curves with smoothly decaying random coefficients (well-separated spectrum)."""
    rng = np.random.default_rng(seed)
    K = basis.n_basis
    j = np.arange(K)
    base = np.sin(np.linspace(0.0, 2.5, K)) + 1.5
    modes = np.stack([np.cos(2.0 * np.pi * (r + 1) * j / K) for r in range(6)])
    sds = scale * 0.7 ** np.arange(6)
    scores = rng.standard_normal((n_days, 6)) * sds
    coef = base + scores @ modes
    return FunctionalVariable(basis, coef, tuple(range(n_days)), name)


@pytest.fixture
def basis30():
    return default_basis()
