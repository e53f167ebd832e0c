"""Clamped B-spline basis systems: evaluation, Gram and roughness-penalty matrices.

All integrals are computed per knot interval with Gauss-Legendre quadrature,
which is exact for the piecewise-polynomial integrands that arise here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline


@dataclass(frozen=True)
class BasisSystem:
    """A clamped B-spline basis on a closed interval.

    ``order`` is the spline order (degree + 1); ``n_basis`` equals the number
    of interior knots plus the order. The full knot vector repeats each
    boundary knot ``order`` times.
    """

    domain: tuple[float, float]
    order: int
    n_basis: int
    knots: np.ndarray = field(repr=False)

    @property
    def degree(self) -> int:
        return self.order - 1

    @property
    def n_interior_knots(self) -> int:
        return self.n_basis - self.order

    @property
    def interior_knots(self) -> np.ndarray:
        return self.knots[self.order:-self.order]

    def _bspline(self, deriv: int = 0) -> BSpline:
        spl = BSpline(self.knots, np.eye(self.n_basis), self.degree, extrapolate=False)
        return spl.derivative(deriv) if deriv else spl

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BasisSystem)
            and self.domain == other.domain
            and self.order == other.order
            and self.n_basis == other.n_basis
            and np.array_equal(self.knots, other.knots)
        )


def make_bspline_basis(domain: tuple[float, float] = (0.0, 24.0),
                       n_basis: int = 30, order: int = 4) -> BasisSystem:
    """Build a clamped B-spline basis with equally spaced interior knots.

    Parameters
    ----------
    domain : (float, float)
        Closed interval the basis lives on.
    n_basis : int
        Basis dimension; must be at least ``order``.
    order : int
        Spline order (4 = cubic).
    """
    lo, hi = float(domain[0]), float(domain[1])
    if not hi > lo:
        raise ValueError(f"degenerate domain [{lo}, {hi}]")
    if order < 2:
        raise ValueError(f"order must be >= 2, got {order}")
    if n_basis < order:
        raise ValueError(f"n_basis={n_basis} must be >= order={order}")
    n_interior = n_basis - order
    interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
    knots = np.concatenate([np.full(order, lo), interior, np.full(order, hi)])
    return BasisSystem(domain=(lo, hi), order=order, n_basis=n_basis, knots=knots)


def eval_basis(basis: BasisSystem, t: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Evaluate all basis functions (or a derivative) at points ``t``.

    Returns a dense ``(len(t), n_basis)`` matrix. Points outside the domain
    raise ``ValueError``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lo, hi = basis.domain
    if t.size and (t.min() < lo or t.max() > hi):
        bad = t[(t < lo) | (t > hi)][0]
        raise ValueError(f"evaluation point {bad} outside domain [{lo}, {hi}]")
    out = basis._bspline(deriv)(t)
    # extrapolate=False marks the closed right endpoint as valid, so any NaN
    # left over would indicate a real domain violation
    return np.nan_to_num(out, nan=0.0) if deriv else out


def _gauss_legendre_per_interval(basis: BasisSystem, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes/weights over the knot spans, exact for degree 2*n_nodes-1."""
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.unique(basis.knots)
    lo_e, hi_e = edges[:-1], edges[1:]
    half = 0.5 * (hi_e - lo_e)
    mid = 0.5 * (hi_e + lo_e)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def quadrature_rule(basis: BasisSystem, n_nodes: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-interval Gauss-Legendre rule exact for products of two basis splines."""
    return _gauss_legendre_per_interval(basis, n_nodes or basis.order)


def gram_matrix(basis: BasisSystem) -> np.ndarray:
    """L2 Gram matrix W[j, k] = integral of B_j(t) B_k(t) over the domain."""
    nodes, weights = _gauss_legendre_per_interval(basis, basis.order)
    B = eval_basis(basis, nodes)
    W = B.T @ (weights[:, None] * B)
    return 0.5 * (W + W.T)


def second_derivative_penalty(basis: BasisSystem) -> np.ndarray:
    """Roughness penalty P[j, k] = integral of B_j''(t) B_k''(t).

    Requires order >= 3 so the second derivative is piecewise continuous.
    """
    if basis.order < 3:
        raise ValueError(f"second-derivative penalty needs order >= 3, got {basis.order}")
    nodes, weights = _gauss_legendre_per_interval(basis, basis.order)
    D2 = eval_basis(basis, nodes, deriv=2)
    P = D2.T @ (weights[:, None] * D2)
    return 0.5 * (P + P.T)


def basis_integrals(basis: BasisSystem) -> np.ndarray:
    """Vector of integrals of each basis function (row sums of the Gram matrix)."""
    return gram_matrix(basis).sum(axis=1)


def greville_abscissae(basis: BasisSystem) -> np.ndarray:
    """Collocation points at which B-spline interpolation is nonsingular."""
    k, t = basis.degree, basis.knots
    return np.array([t[j + 1:j + 1 + k].mean() for j in range(basis.n_basis)])
