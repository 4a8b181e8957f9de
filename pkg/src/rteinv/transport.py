"""Discrete-ordinates solver for the 1-D stationary transport equation.

Solves v df/dx = (sigma_s/kn) (<f> - f) - kn sigma_a f on (0,1) x [-1,1]
with inflow data prescribed on Gamma_- = {(0, v>0)} u {(1, v<0)}, using
first-order upwind streaming on the tensor grid.  Upwinding is the simplest
monotone choice: it preserves the maximum principle and the discrete
conservation identity of the critical case, at O(dx) accuracy.

The adjoint problem (transport in the -v direction with data on Gamma_+)
is available in two modes: "continuous" discretizes the backward equation
directly; "algebraic" solves the transpose of the forward system against a
boundary measurement functional, which makes the discrete duality pairing
against volumetric sources exact to solver tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import CoefficientField, FieldError
from .mesh import AngularQuadrature, SpatialGrid

__all__ = [
    "TransportError",
    "SolverFailure",
    "BoundaryData",
    "TransportProblem",
    "TransportSolution",
    "DiscreteTransportOperator",
    "assemble_operator",
    "solve_forward",
    "solve_adjoint",
    "measure_outflow",
    "net_flux",
    "upwind_net_flux",
    "solution_to_csv",
    "measurement_functional",
]

GMRES_TOL = 1e-10
GMRES_RESTART = 50
GMRES_MAX_INNER = 5000


class TransportError(ValueError):
    """Invalid transport problem or data."""


class SolverFailure(RuntimeError):
    """Linear solve failed to reach the residual tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class BoundaryData:
    """Boundary values on the half-range ordinates of each endpoint.

    `left` and `right` are full length-n_v arrays; only the half range that
    is prescribed at that endpoint is read (v>0 at x=0 and v<0 at x=1 for a
    forward problem, the opposite halves for an adjoint problem).
    """

    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        left = np.atleast_1d(np.asarray(self.left, dtype=float))
        right = np.atleast_1d(np.asarray(self.right, dtype=float))
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        if left.shape != right.shape or left.ndim != 1:
            raise TransportError("boundary data must be two equal-length vectors")
        if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
            raise TransportError("boundary data must be finite")

    @classmethod
    def zero(cls, quad: AngularQuadrature) -> "BoundaryData":
        z = np.zeros(quad.n_v)
        return cls(z, z.copy())

    @classmethod
    def isotropic(cls, quad: AngularQuadrature, left: float, right: float) -> "BoundaryData":
        return cls(np.full(quad.n_v, float(left)), np.full(quad.n_v, float(right)))

    @classmethod
    def velocity_delta(
        cls,
        quad: AngularQuadrature,
        ordinate_index: int,
        normalized: bool = True,
    ) -> "BoundaryData":
        """Inflow concentrated on a single ordinate.

        With `normalized` the coefficient is 1/omega_d so the normalized
        angular integral of the inflow is one; otherwise the plain unit
        vector is used.  The ordinate sign selects the endpoint (v>0 enters
        at x=0, v<0 at x=1).
        """
        j = int(ordinate_index)
        if not 0 <= j < quad.n_v:
            raise TransportError(f"ordinate index {j} out of range")
        amplitude = 1.0 / quad.weights[j] if normalized else 1.0
        left = np.zeros(quad.n_v)
        right = np.zeros(quad.n_v)
        if quad.ordinates[j] > 0:
            left[j] = amplitude
        else:
            right[j] = amplitude
        return cls(left, right)


@dataclass(frozen=True)
class TransportProblem:
    """Coefficients and discretization for one transport solve."""

    grid: SpatialGrid
    quad: AngularQuadrature
    sigma_s: CoefficientField
    sigma_a: CoefficientField
    kn: float

    def __post_init__(self):
        if not (np.isfinite(self.kn) and self.kn > 0):
            raise TransportError(f"kn must be positive, got {self.kn}")
        for name, f in (("sigma_s", self.sigma_s), ("sigma_a", self.sigma_a)):
            if f.grid is not self.grid and not np.array_equal(f.grid.nodes, self.grid.nodes):
                raise TransportError(f"{name} is sampled on a different grid")
        if np.any(self.sigma_s.values < 0):
            raise FieldError("sigma_s must be nonnegative")
        self.sigma_a.require_nonnegative("sigma_a")

    @property
    def n_unknowns(self) -> int:
        return self.grid.n_x * self.quad.n_v


@dataclass(frozen=True)
class TransportSolution:
    """f(x_i, v_j) on the tensor grid."""

    values: np.ndarray
    problem: TransportProblem
    residual: float = 0.0
    method: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        expected = (self.problem.grid.n_x, self.problem.quad.n_v)
        if values.shape != expected:
            raise TransportError(f"solution shape {values.shape}, expected {expected}")
        if not np.all(np.isfinite(values)):
            raise TransportError("solution values must be finite")

    def outflow_trace(self, endpoint: str) -> np.ndarray:
        """Values on the outgoing half range of an endpoint (other half zeroed)."""
        quad = self.problem.quad
        out = np.zeros(quad.n_v)
        if endpoint == "right":
            mask = quad.positive
            out[mask] = self.values[-1, mask]
        elif endpoint == "left":
            mask = quad.negative
            out[mask] = self.values[0, mask]
        else:
            raise TransportError(f"endpoint must be 'left' or 'right', got {endpoint!r}")
        return out

    def inflow_trace(self, endpoint: str) -> np.ndarray:
        quad = self.problem.quad
        out = np.zeros(quad.n_v)
        if endpoint == "left":
            mask = quad.positive
            out[mask] = self.values[0, mask]
        elif endpoint == "right":
            mask = quad.negative
            out[mask] = self.values[-1, mask]
        else:
            raise TransportError(f"endpoint must be 'left' or 'right', got {endpoint!r}")
        return out


class DiscreteTransportOperator:
    """Sparse upwind system: streaming + collision + absorption.

    Rows belonging to prescribed (inflow) unknowns are identity rows; the
    right-hand side carries the boundary values there and the volumetric
    source everywhere else.
    """

    def __init__(self, problem: TransportProblem, direction: str = "forward"):
        if direction not in ("forward", "backward"):
            raise TransportError(f"direction must be 'forward' or 'backward', got {direction!r}")
        self.problem = problem
        self.direction = direction
        self._lu = None
        self._ilu = None
        self._assemble()

    def replace_rows(self, matrix, inflow_mask) -> "DiscreteTransportOperator":
        """New operator sharing this problem but with a modified system matrix.

        Used by boundary closures that couple prescribed unknowns back into
        the system (the truncated half-space problem).
        """
        other = object.__new__(DiscreteTransportOperator)
        other.problem = self.problem
        other.direction = self.direction
        other._lu = None
        other._ilu = None
        other.matrix = matrix.tocsr()
        other.inflow_mask = inflow_mask
        other.equation_mask = ~inflow_mask
        return other

    def _assemble(self):
        grid, quad = self.problem.grid, self.problem.quad
        n_x, n_v = grid.n_x, quad.n_v
        dx = grid.dx
        kn = self.problem.kn
        sig_s = self.problem.sigma_s.values
        sig_a = self.problem.sigma_a.values
        v = quad.ordinates
        omega = quad.weights
        flow = v if self.direction == "forward" else -v

        idx = np.arange(n_x * n_v).reshape(n_x, n_v)
        inflow = np.zeros((n_x, n_v), dtype=bool)
        inflow[0, flow > 0] = True
        inflow[-1, flow < 0] = True
        eq = ~inflow

        # upwind neighbor index along x, per ordinate
        shift = np.where(flow > 0, -1, 1)
        neighbor = np.clip(np.arange(n_x)[:, None] + shift[None, :], 0, n_x - 1)

        stream = np.abs(v)[None, :] / dx
        diag = stream + (sig_s / kn + kn * sig_a)[:, None]

        rows, cols, data = [], [], []
        # identity rows for prescribed unknowns
        rows.append(idx[inflow])
        cols.append(idx[inflow])
        data.append(np.ones(int(inflow.sum())))
        # streaming + local terms
        rows.append(idx[eq])
        cols.append(idx[eq])
        data.append(diag[eq])
        ordinate = np.broadcast_to(np.arange(n_v)[None, :], (n_x, n_v))
        rows.append(idx[eq])
        cols.append(idx[neighbor, ordinate][eq])
        data.append(-np.broadcast_to(stream, (n_x, n_v))[eq])
        # collision coupling: row (i,j) gets -(sig_s_i/kn) * omega_k at column (i,k)
        coef = (sig_s / kn)[:, None, None] * omega[None, None, :]  # (n_x, 1, n_v)
        coef = np.broadcast_to(coef, (n_x, n_v, n_v))
        row3 = np.broadcast_to(idx[:, :, None], (n_x, n_v, n_v))
        col3 = np.broadcast_to(idx[:, None, :], (n_x, n_v, n_v))
        keep = eq[:, :, None] & np.ones((1, 1, n_v), dtype=bool)
        rows.append(row3[keep])
        cols.append(col3[keep])
        data.append(-coef[keep])

        matrix = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_x * n_v, n_x * n_v),
        ).tocsr()

        self.matrix = matrix
        self.inflow_mask = inflow
        self.equation_mask = eq

    # -- right-hand sides -------------------------------------------------

    def rhs(self, inflow: Optional[BoundaryData] = None, source: Optional[np.ndarray] = None) -> np.ndarray:
        n_x, n_v = self.problem.grid.n_x, self.problem.quad.n_v
        b = np.zeros((n_x, n_v))
        if source is not None:
            src = np.asarray(source, dtype=float)
            if src.shape != (n_x, n_v):
                raise TransportError(f"source shape {src.shape}, expected {(n_x, n_v)}")
            b[self.equation_mask] = src[self.equation_mask]
        if inflow is not None:
            if inflow.left.size != n_v:
                raise TransportError("boundary data length does not match quadrature")
            left_mask = self.inflow_mask[0]
            right_mask = self.inflow_mask[-1]
            b[0, left_mask] = inflow.left[left_mask]
            b[-1, right_mask] = inflow.right[right_mask]
        return b.ravel()

    # -- linear solves -----------------------------------------------------

    def _direct(self):
        if self._lu is None:
            self._lu = spla.splu(self.matrix.tocsc())
        return self._lu

    def _incomplete_lu(self):
        if self._ilu is None:
            try:
                self._ilu = spla.spilu(self.matrix.tocsc(), drop_tol=1e-5, fill_factor=20)
            except RuntimeError:
                self._ilu = False
        return self._ilu or None

    def _preconditioner(self, transpose: bool):
        ilu = self._incomplete_lu()
        if ilu is None:
            return None
        n = self.matrix.shape[0]
        if transpose:
            return spla.LinearOperator((n, n), matvec=lambda z: ilu.solve(z, trans="T"))
        return spla.LinearOperator((n, n), matvec=ilu.solve)

    def _relative_residual(self, x: np.ndarray, b: np.ndarray, transpose: bool) -> float:
        norm_b = np.linalg.norm(b)
        if norm_b == 0:
            return 0.0 if np.linalg.norm(x) == 0 else np.inf
        matrix = self.matrix.T if transpose else self.matrix
        return float(np.linalg.norm(matrix @ x - b) / norm_b)

    def _solve_system(self, b: np.ndarray, method: str, transpose: bool):
        if method not in ("gmres", "direct", "dense"):
            raise TransportError(f"unknown solve method {method!r}")
        if method == "dense":
            dense = self.matrix.toarray()
            x = np.linalg.solve(dense.T if transpose else dense, b)
            return x, self._relative_residual(x, b, transpose), "dense"
        if method == "gmres":
            matrix = self.matrix.T.tocsr() if transpose else self.matrix
            x, _ = spla.gmres(
                matrix,
                b,
                rtol=GMRES_TOL,
                atol=0.0,
                restart=GMRES_RESTART,
                maxiter=GMRES_MAX_INNER // GMRES_RESTART,
                M=self._preconditioner(transpose),
            )
            res = self._relative_residual(x, b, transpose)
            if res <= GMRES_TOL:
                return x, res, "gmres"
        # direct path, also the fallback when GMRES stalls
        lu = self._direct()
        x = lu.solve(b, trans="T") if transpose else lu.solve(b)
        res = self._relative_residual(x, b, transpose)
        if not np.isfinite(res) or res > 1e-8:
            raise SolverFailure("direct solve did not reach tolerance", res)
        return x, res, "direct"

    def solve(self, rhs: np.ndarray, method: str = "gmres") -> TransportSolution:
        x, res, used = self._solve_system(np.asarray(rhs, dtype=float).ravel(), method, False)
        values = x.reshape(self.problem.grid.n_x, self.problem.quad.n_v)
        return TransportSolution(values, self.problem, residual=res, method=used)

    def solve_transpose(self, functional: np.ndarray, method: str = "gmres"):
        """Solve matrix.T x = functional; returns (x, residual, method used)."""
        b = np.asarray(functional, dtype=float).ravel()
        return self._solve_system(b, method, transpose=True)


def assemble_operator(problem: TransportProblem, direction: str = "forward") -> DiscreteTransportOperator:
    """Upwind discretization of +/- v df/dx = (sigma_s/kn)(<f>-f) - kn sigma_a f."""
    return DiscreteTransportOperator(problem, direction)


def solve_forward(
    problem: TransportProblem,
    inflow: BoundaryData,
    source: Optional[np.ndarray] = None,
    method: str = "gmres",
    operator: Optional[DiscreteTransportOperator] = None,
) -> TransportSolution:
    """Solve the forward problem for given inflow (and optional volumetric source)."""
    op = operator if operator is not None else assemble_operator(problem, "forward")
    return op.solve(op.rhs(inflow, source), method=method)


def measurement_functional(problem: TransportProblem, outflow_data: BoundaryData) -> np.ndarray:
    """Vector m with m . f = sum over Gamma_+ of omega |v| (outflow data) f."""
    quad = problem.quad
    m = np.zeros((problem.grid.n_x, quad.n_v))
    pos, neg = quad.positive, quad.negative
    m[-1, pos] = quad.weights[pos] * quad.ordinates[pos] * outflow_data.right[pos]
    m[0, neg] = quad.weights[neg] * (-quad.ordinates[neg]) * outflow_data.left[neg]
    return m.ravel()


def solve_adjoint(
    problem: TransportProblem,
    outflow_data: BoundaryData,
    mode: str = "continuous",
    method: str = "gmres",
    operator: Optional[DiscreteTransportOperator] = None,
) -> TransportSolution:
    """Solve the adjoint problem with data prescribed on Gamma_+.

    continuous: upwind discretization of the backward equation
    -v dg/dx = (sigma_s/kn)(<g>-g) - kn sigma_a g with g = data on Gamma_+.

    algebraic: transpose of the forward system solved against the boundary
    measurement functional of `outflow_data`, rescaled by the tensor
    quadrature weights w_i omega_j.  The resulting field makes the discrete
    duality identity (kernel row) . (perturbation) = (linearized data) exact
    to solver tolerance; its entries on the forward inflow set are zero by
    construction.
    """
    if mode == "continuous":
        op = operator if operator is not None else assemble_operator(problem, "backward")
        if op.direction != "backward":
            raise TransportError("continuous adjoint needs the backward operator")
        return op.solve(op.rhs(outflow_data), method=method)
    if mode == "algebraic":
        op = operator if operator is not None else assemble_operator(problem, "forward")
        if op.direction != "forward":
            raise TransportError("algebraic adjoint transposes the forward operator")
        m = measurement_functional(problem, outflow_data)
        raw, res, used = op.solve_transpose(m, method=method)
        scale = np.outer(problem.grid.weights, problem.quad.weights)
        values = raw.reshape(problem.grid.n_x, problem.quad.n_v) / scale
        values[op.inflow_mask] = 0.0
        return TransportSolution(values, problem, residual=res, method=f"algebraic-{used}")
    raise TransportError(f"mode must be 'continuous' or 'algebraic', got {mode!r}")


def measure_outflow(solution: TransportSolution, endpoint: str) -> float:
    """Velocity-averaged outgoing flux at one endpoint (normalized measure)."""
    quad = solution.problem.quad
    if endpoint == "right":
        mask = quad.positive
        return float(np.sum(quad.weights[mask] * quad.ordinates[mask] * solution.values[-1, mask]))
    if endpoint == "left":
        mask = quad.negative
        return float(np.sum(quad.weights[mask] * (-quad.ordinates[mask]) * solution.values[0, mask]))
    raise TransportError(f"endpoint must be 'left' or 'right', got {endpoint!r}")


def net_flux(solution: TransportSolution, node_index: Optional[int] = None):
    """Nodal net flux J(x_i) = sum_j omega_j v_j f(x_i, v_j)."""
    quad = solution.problem.quad
    j = solution.values @ (quad.weights * quad.ordinates)
    if node_index is None:
        return j
    return float(j[node_index])


def upwind_net_flux(solution: TransportSolution) -> np.ndarray:
    """Net flux through cell interfaces as seen by the upwind scheme.

    Interface i+1/2 takes the v>0 contribution from node i and the v<0
    contribution from node i+1.  In the critical case (sigma_a = 0) this
    functional is constant across interfaces up to the solver residual,
    which is the discrete form of the divergence-free property; the nodal
    `net_flux` matches it only to O(dx).
    """
    quad = solution.problem.quad
    wv = quad.weights * quad.ordinates
    pos, neg = quad.positive, quad.negative
    jplus = solution.values[:, pos] @ wv[pos]
    jminus = solution.values[:, neg] @ wv[neg]
    return jplus[:-1] + jminus[1:]


def solution_to_csv(solution: TransportSolution, path) -> None:
    """Write the solution as CSV rows x,v,f (full precision)."""
    grid, quad = solution.problem.grid, solution.problem.quad
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,v,f\n")
        for i in range(grid.n_x):
            for j in range(quad.n_v):
                fh.write(
                    f"{grid.nodes[i]:.17g},{quad.ordinates[j]:.17g},{solution.values[i, j]:.17g}\n"
                )
