"""Spatial grids on [0,1] and angular quadratures on [-1,1].

The angular measure is normalized: quadrature weights sum to one and
represent dv/2, so averages, moments and boundary measurements carry no
stray factors of two anywhere downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridError",
    "SpatialGrid",
    "AngularQuadrature",
    "make_uniform_grid",
    "make_gauss_quadrature",
    "make_double_gauss_quadrature",
]


class GridError(ValueError):
    """Invalid grid or quadrature construction."""


@dataclass(frozen=True)
class SpatialGrid:
    """Nodes x_i in [0,1] with quadrature weights w_i (sum to 1)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.ndim != 1 or nodes.size < 3:
            raise GridError("grid needs at least 3 nodes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise GridError("grid must span [0, 1]")
        if np.any(np.diff(nodes) <= 0):
            raise GridError("grid nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise GridError("grid weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise GridError("grid weights must sum to 1")

    @property
    def n_x(self) -> int:
        return self.nodes.size

    @property
    def dx(self) -> float:
        return float(self.nodes[1] - self.nodes[0])


@dataclass(frozen=True)
class AngularQuadrature:
    """Ordinates v_j in (-1,1)\\{0} with normalized weights (sum to 1)."""

    ordinates: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.ordinates, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "ordinates", v)
        object.__setattr__(self, "weights", w)
        if v.ndim != 1 or v.size < 2 or v.size % 2 != 0:
            raise GridError("quadrature needs an even number of ordinates")
        if np.any(v == 0.0) or np.any(np.abs(v) >= 1.0):
            raise GridError("ordinates must lie in (-1,1) and avoid v=0")
        if abs(w.sum() - 1.0) > 1e-12:
            raise GridError("quadrature weights must sum to 1")
        # symmetry: ordinates come in +/- pairs with equal weights
        order = np.argsort(v)
        if not np.allclose(v[order], -v[order][::-1], rtol=0, atol=1e-14):
            raise GridError("ordinates must be symmetric about 0")
        if not np.allclose(w[order], w[order][::-1], rtol=0, atol=1e-14):
            raise GridError("weights must be symmetric about 0")

    @property
    def n_v(self) -> int:
        return self.ordinates.size

    @property
    def positive(self) -> np.ndarray:
        """Boolean mask of ordinates with v > 0."""
        return self.ordinates > 0

    @property
    def negative(self) -> np.ndarray:
        return self.ordinates < 0

    def average(self, values: np.ndarray) -> np.ndarray:
        """Normalized angular average over the last axis."""
        return np.asarray(values) @ self.weights


def make_uniform_grid(n_x: int) -> SpatialGrid:
    """Uniform grid on [0,1] with trapezoidal weights (halved at endpoints)."""
    if n_x < 3:
        raise GridError(f"n_x must be >= 3, got {n_x}")
    nodes = np.linspace(0.0, 1.0, n_x)
    dx = 1.0 / (n_x - 1)
    weights = np.full(n_x, dx)
    weights[0] = weights[-1] = dx / 2
    return SpatialGrid(nodes, weights)


def make_gauss_quadrature(n_v: int) -> AngularQuadrature:
    """Gauss-Legendre rule on [-1,1], weights rescaled to the dv/2 measure.

    Exact for polynomials in v up to degree 2*n_v - 1.  n_v must be even so
    that no ordinate lands on v=0 (upwinding is undefined there).
    """
    if n_v < 2 or n_v % 2 != 0:
        raise GridError(f"n_v must be even and >= 2, got {n_v}")
    v, w = np.polynomial.legendre.leggauss(n_v)
    return AngularQuadrature(v, w / 2.0)


def make_double_gauss_quadrature(n_v: int) -> AngularQuadrature:
    """Composite Gauss rule: n_v/2 Gauss-Legendre points on each half range.

    Half-range moments (outflow measurements, partial currents) are exact,
    which the full-range rule cannot offer for integrands with a kink at v=0.
    """
    if n_v < 2 or n_v % 2 != 0:
        raise GridError(f"n_v must be even and >= 2, got {n_v}")
    t, wt = np.polynomial.legendre.leggauss(n_v // 2)
    vp = 0.5 * (t + 1.0)  # map [-1,1] -> (0,1)
    wp = 0.25 * wt  # half-interval Jacobian, then dv/2 normalization
    v = np.concatenate([-vp[::-1], vp])
    w = np.concatenate([wp[::-1], wp])
    return AngularQuadrature(v, w)
