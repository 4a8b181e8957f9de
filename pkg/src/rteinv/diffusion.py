"""Small-Knudsen limiting objects.

The transport solution's angular average approaches the solution of
(1/3) d/dx( (1/sigma_s) d rho/dx ) = sigma_a rho with Dirichlet data
supplied by a half-space boundary-layer problem.  This module provides the
three-point finite-difference diffusion solver, the Green's-function pair
carrying the two boundary influences, a truncated half-space solver for
the Dirichlet data, and the interior-error diagnostic used to measure the
approach to the limit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import CoefficientField
from .mesh import AngularQuadrature, SpatialGrid, make_uniform_grid
from .transport import (
    DiscreteTransportOperator,
    TransportError,
    TransportProblem,
    TransportSolution,
)

__all__ = [
    "DIFFUSION_COEFFICIENT",
    "DiffusionProblem",
    "GreensPair",
    "HalfSpaceProblem",
    "HalfSpaceResult",
    "solve_diffusion",
    "greens_functions",
    "halfspace_limit",
    "interior_error",
    "field_to_csv",
    "halfspace_result_to_json",
]

# Flux constant of the one-dimensional reduction (<v^2> with the normalized
# angular measure).  Fixed, not a parameter, so it cannot silently drift
# from the transport convention.
DIFFUSION_COEFFICIENT = 1.0 / 3.0


@dataclass(frozen=True)
class DiffusionProblem:
    """Variable-coefficient diffusion problem with Dirichlet data."""

    grid: SpatialGrid
    sigma_s: CoefficientField
    sigma_a: CoefficientField
    xi_left: float
    xi_right: float

    def __post_init__(self):
        self.sigma_s.require_positive("sigma_s")
        self.sigma_a.require_nonnegative("sigma_a")
        if not (np.isfinite(self.xi_left) and np.isfinite(self.xi_right)):
            raise TransportError("boundary values must be finite")

    @property
    def c_diff(self) -> float:
        return DIFFUSION_COEFFICIENT


@dataclass(frozen=True)
class GreensPair:
    """Diffusion solutions with boundary data (1,0) and (0,1)."""

    g1: CoefficientField
    g2: CoefficientField


@dataclass(frozen=True)
class HalfSpaceProblem:
    """Purely scattering half space, truncated at z_length mean free paths.

    The inflow profile is prescribed on the v>0 ordinates at z=0.  Because
    the domain is measured in mean free paths, the (constant) scattering
    coefficient drops out of the discrete problem entirely; it is kept for
    interface completeness and validated positive.
    """

    quad: AngularQuadrature
    inflow: np.ndarray
    sigma_s: float = 1.0
    z_length: float = 50.0
    closure: str = "reflective"
    n_z: int = 400

    def __post_init__(self):
        inflow = np.asarray(self.inflow, dtype=float)
        object.__setattr__(self, "inflow", inflow)
        if inflow.shape != (self.quad.n_v,):
            raise TransportError("half-space inflow must be one value per ordinate")
        if not (self.sigma_s > 0 and np.isfinite(self.sigma_s)):
            raise TransportError("sigma_s must be a positive constant")
        if not (self.z_length > 0 and np.isfinite(self.z_length)):
            raise TransportError("z_length must be positive")
        if self.closure not in ("reflective", "average-matching"):
            raise TransportError(f"unknown closure {self.closure!r}")

    @classmethod
    def from_callable(cls, quad: AngularQuadrature, profile, **kwargs) -> "HalfSpaceProblem":
        values = np.zeros(quad.n_v)
        pos = quad.positive
        values[pos] = profile(quad.ordinates[pos])
        return cls(quad=quad, inflow=values, **kwargs)


@dataclass(frozen=True)
class HalfSpaceResult:
    """Far-field value with its truncation-length sensitivity."""

    xi: float
    z_length: float
    sensitivity: float
    converged: bool


def solve_diffusion(problem: DiffusionProblem) -> CoefficientField:
    """Three-point finite-difference solve, flux coefficient at cell midpoints.

    Exact on linear profiles when sigma_a = 0; second order otherwise.
    """
    grid = problem.grid
    n, dx = grid.n_x, grid.dx
    inv_s = 1.0 / problem.sigma_s.values
    beta = 0.5 * (inv_s[:-1] + inv_s[1:])  # 1/sigma_s at midpoints
    c = problem.c_diff / dx**2

    interior = np.arange(1, n - 1)
    rows = np.concatenate([[0, n - 1], interior, interior, interior])
    cols = np.concatenate([[0, n - 1], interior - 1, interior + 1, interior])
    data = np.concatenate([
        [1.0, 1.0],
        c * beta[interior - 1],
        c * beta[interior],
        -c * (beta[interior - 1] + beta[interior]) - problem.sigma_a.values[interior],
    ])
    matrix = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    rhs = np.zeros(n)
    rhs[0], rhs[-1] = problem.xi_left, problem.xi_right
    solution = spla.spsolve(matrix.tocsc(), rhs)
    if not np.all(np.isfinite(solution)):
        raise TransportError("diffusion system is singular")
    return CoefficientField(solution, grid)


def greens_functions(
    sigma_s: CoefficientField, sigma_a: CoefficientField, grid: SpatialGrid
) -> GreensPair:
    """The two boundary-influence solutions with data (1,0) and (0,1)."""
    g1 = solve_diffusion(DiffusionProblem(grid, sigma_s, sigma_a, 1.0, 0.0))
    g2 = solve_diffusion(DiffusionProblem(grid, sigma_s, sigma_a, 0.0, 1.0))
    return GreensPair(g1, g2)


def _halfspace_average(problem: HalfSpaceProblem, z_length: float) -> float:
    """Angular average at the truncation end of the scaled slab solve."""
    quad = problem.quad
    n_z = max(3, int(round(problem.n_z * z_length / problem.z_length)))
    grid = make_uniform_grid(n_z)
    # z in mean free paths mapped to [0,1]: v f_x = z_length (<f> - f)
    scaled = TransportProblem(
        grid,
        quad,
        CoefficientField.constant(z_length, grid),
        CoefficientField.constant(0.0, grid),
        kn=1.0,
    )
    op = DiscreteTransportOperator(scaled, "forward")
    matrix = op.matrix.tolil()
    n_v = quad.n_v
    neg = np.flatnonzero(quad.negative)
    pos = np.flatnonzero(quad.positive)
    base = (grid.n_x - 1) * n_v
    for j in neg:
        row = np.zeros(n_v)
        row[j] = 1.0
        if problem.closure == "reflective":
            # incoming at the far end matches the average of the outgoing flow
            row[pos] -= quad.weights[pos] / quad.weights[pos].sum()
        else:  # average-matching: incoming set to the full angular average
            row -= quad.weights
        matrix.rows[base + j] = []
        matrix.data[base + j] = []
        matrix[base + j, base : base + n_v] = row
    inflow_mask = op.inflow_mask.copy()
    inflow_mask[-1, :] = False
    closed = op.replace_rows(matrix, inflow_mask)
    rhs = np.zeros((grid.n_x, n_v))
    rhs[0, pos] = problem.inflow[pos]
    solution = closed.solve(rhs.ravel(), method="direct")
    return float(solution.values[-1] @ quad.weights)


def halfspace_limit(problem: HalfSpaceProblem) -> HalfSpaceResult:
    """Far-field value of the truncated half-space problem.

    Returns the angular average at z = z_length together with the relative
    change observed when the truncation length is doubled; a change beyond
    5% marks the result as not converged.
    """
    xi = _halfspace_average(problem, problem.z_length)
    xi2 = _halfspace_average(problem, 2.0 * problem.z_length)
    scale = max(abs(xi2), 1e-300)
    sensitivity = abs(xi2 - xi) / scale
    return HalfSpaceResult(
        xi=xi,
        z_length=problem.z_length,
        sensitivity=sensitivity,
        converged=bool(sensitivity <= 0.05),
    )


def interior_error(
    transport: TransportSolution,
    diffusion: CoefficientField,
    layer_width_factor: float = 5.0,
    margin: Optional[float] = None,
) -> float:
    """Max difference between <f> and the diffusion profile away from layers.

    The excluded boundary strip has width layer_width_factor * kn by
    default; pass `margin` to fix an absolute width instead (useful for
    comparing several Knudsen numbers on one common region).
    """
    grid = transport.problem.grid
    if diffusion.grid.n_x != grid.n_x or not np.array_equal(diffusion.grid.nodes, grid.nodes):
        raise TransportError("transport and diffusion fields live on different grids")
    width = layer_width_factor * transport.problem.kn if margin is None else margin
    mask = np.minimum(grid.nodes, 1.0 - grid.nodes) > width
    if not np.any(mask):
        raise TransportError(
            f"empty interior: exclusion width {width:.3g} swallows the whole domain"
        )
    favg = transport.values @ transport.problem.quad.weights
    return float(np.abs(favg - diffusion.values)[mask].max())


def field_to_csv(field: CoefficientField, path, header: str = "x,value") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for x, v in zip(field.grid.nodes, field.values):
            fh.write(f"{x:.17g},{v:.17g}\n")


def halfspace_result_to_json(result: HalfSpaceResult, path=None) -> str:
    payload = json.dumps(
        {"xi": result.xi, "Z": result.z_length, "sensitivity": result.sensitivity},
        indent=2,
    )
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    return payload
