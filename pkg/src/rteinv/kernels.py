"""Fredholm sensitivity kernels for the linearized coefficient problems.

For a background problem and a (source, detector) pair, the sensitivity
density gamma relates a coefficient perturbation to the measurement
residual through  sum_i gamma(x_i) sigma~(x_i) w_i = b.  Assembling gamma
over a source/detector plan produces the rectangular system  A sigma~ = b
whose conditioning is the object of study.

Sign convention: with the adjoint field g >= 0 the absorption kernel
Kn <f0 g> is positive, while added absorption lowers the measured outflow.
The data vector therefore stores background-minus-perturbed measurements
for the absorption problem and perturbed-minus-background for the
scattering problems, so that A sigma~ = b holds with the kernels as
defined (exactly, in the algebraic adjoint mode).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .fields import CoefficientField
from .mesh import SpatialGrid, make_uniform_grid
from .transport import (
    BoundaryData,
    TransportError,
    TransportProblem,
    TransportSolution,
    assemble_operator,
    measure_outflow,
    solve_adjoint,
    solve_forward,
)

__all__ = [
    "ProblemKind",
    "SourceDetectorPlan",
    "KernelMatrix",
    "DataVector",
    "gamma_absorption",
    "gamma_scattering",
    "assemble_kernel_matrix",
    "synthesize_data",
    "duality_residual",
    "kernel_to_csv",
    "data_to_csv",
]


class ProblemKind(Enum):
    ABSORPTION = "absorption"
    SCATTERING_CRITICAL = "scattering-critical"
    SCATTERING_SUBCRITICAL = "scattering-subcritical"

    @property
    def perturbs(self) -> str:
        return "sigma_a" if self is ProblemKind.ABSORPTION else "sigma_s"

    @property
    def data_sign(self) -> float:
        """Sign applied to (perturbed - background) measurements in b."""
        return -1.0 if self is ProblemKind.ABSORPTION else 1.0


@dataclass(frozen=True)
class SourceDetectorPlan:
    """Inflow sources phi_d and endpoint detectors delta_y.

    Row p of the assembled system corresponds to detector k and source d
    through p = k * n_sources + d.
    """

    sources: tuple
    detectors: tuple

    def __post_init__(self):
        if len(self.sources) == 0 or len(self.detectors) == 0:
            raise TransportError("plan needs at least one source and one detector")
        for det in self.detectors:
            if det not in ("left", "right"):
                raise TransportError(f"detector must be 'left' or 'right', got {det!r}")
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "detectors", tuple(self.detectors))

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_detectors(self) -> int:
        return len(self.detectors)

    @property
    def n_pairs(self) -> int:
        return self.n_sources * self.n_detectors

    def pair_index(self, detector_index: int, source_index: int) -> int:
        return detector_index * self.n_sources + source_index

    def pair(self, p: int):
        return divmod(p, self.n_sources)

    @classmethod
    def paper_plan(cls, quad, normalized: bool = True) -> "SourceDetectorPlan":
        """One velocity-delta source per ordinate plus both endpoint detectors.

        Positive ordinates enter at the left, negative at the right, so the
        source count equals n_v and the system has 2 n_v rows.
        """
        sources = [
            BoundaryData.velocity_delta(quad, d, normalized=normalized)
            for d in range(quad.n_v)
        ]
        return cls(tuple(sources), ("left", "right"))


@dataclass(frozen=True)
class KernelMatrix:
    """Rows gamma(x_i; delta_k, phi_d) (times w_i when weights are included)."""

    entries: np.ndarray
    grid: SpatialGrid
    kind: ProblemKind
    kn: float
    weights_included: bool
    plan: SourceDetectorPlan

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", entries)
        if entries.shape != (self.plan.n_pairs, self.grid.n_x):
            raise TransportError(
                f"kernel shape {entries.shape}, expected {(self.plan.n_pairs, self.grid.n_x)}"
            )
        if not np.all(np.isfinite(entries)):
            raise TransportError("kernel entries must be finite")

    @property
    def shape(self):
        return self.entries.shape

    def interior_columns(
        self, layer_width_factor: float = 5.0, margin: Optional[float] = None
    ) -> np.ndarray:
        """Boolean mask of columns outside the boundary strips."""
        width = layer_width_factor * self.kn if margin is None else margin
        mask = np.minimum(self.grid.nodes, 1.0 - self.grid.nodes) > width
        if not np.any(mask):
            raise TransportError(
                f"empty interior: exclusion width {width:.3g} swallows the whole domain"
            )
        return mask

    def interior(
        self, layer_width_factor: float = 5.0, margin: Optional[float] = None
    ) -> np.ndarray:
        return self.entries[:, self.interior_columns(layer_width_factor, margin)]


@dataclass(frozen=True)
class DataVector:
    """Measurement residuals, one per (detector, source) pair."""

    values: np.ndarray
    kind: ProblemKind
    plan: SourceDetectorPlan

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.plan.n_pairs,):
            raise TransportError("data length does not match the plan")
        if not np.all(np.isfinite(values)):
            raise TransportError("data values must be finite")


def _check_same_grids(f0: TransportSolution, g: TransportSolution):
    pf, pg = f0.problem, g.problem
    if pf.grid.n_x != pg.grid.n_x or not np.array_equal(pf.grid.nodes, pg.grid.nodes):
        raise TransportError("solutions live on different spatial grids")
    if not np.array_equal(pf.quad.ordinates, pg.quad.ordinates):
        raise TransportError("solutions use different quadratures")


def gamma_absorption(f0: TransportSolution, g: TransportSolution, kn: float) -> CoefficientField:
    """kn * <f0 g>(x_i): sensitivity of the measurement to added absorption."""
    _check_same_grids(f0, g)
    w = f0.problem.quad.weights
    return CoefficientField(kn * ((f0.values * g.values) @ w), f0.problem.grid)


def gamma_scattering(f0: TransportSolution, g: TransportSolution, kn: float) -> CoefficientField:
    """(1/kn) (<f0><g> - <f0 g>)(x_i): sensitivity to a scattering change."""
    _check_same_grids(f0, g)
    w = f0.problem.quad.weights
    rf = f0.values @ w
    rg = g.values @ w
    fg = (f0.values * g.values) @ w
    return CoefficientField((rf * rg - fg) / kn, f0.problem.grid)


def _gamma(kind: ProblemKind, f0, g, kn) -> np.ndarray:
    if kind is ProblemKind.ABSORPTION:
        return gamma_absorption(f0, g, kn).values
    return gamma_scattering(f0, g, kn).values


def _detector_data(quad, detector: str) -> BoundaryData:
    if detector == "left":
        return BoundaryData.isotropic(quad, 1.0, 0.0)
    return BoundaryData.isotropic(quad, 0.0, 1.0)


def _validate_kind(kind: ProblemKind, problem: TransportProblem):
    if kind is ProblemKind.SCATTERING_CRITICAL and np.any(problem.sigma_a.values != 0):
        raise TransportError("the critical scattering problem requires sigma_a = 0")


def _refined_problem(problem: TransportProblem, refine: int) -> TransportProblem:
    """Same coefficients linearly interpolated onto a nested finer grid."""
    n_fine = refine * (problem.grid.n_x - 1) + 1
    grid = make_uniform_grid(n_fine)
    def lift(field):
        return CoefficientField(
            np.interp(grid.nodes, problem.grid.nodes, field.values), grid
        )
    return TransportProblem(grid, problem.quad, lift(problem.sigma_s), lift(problem.sigma_a), problem.kn)


def assemble_kernel_matrix(
    problem: TransportProblem,
    plan: SourceDetectorPlan,
    kind: ProblemKind,
    include_weights: bool = True,
    adjoint_mode: str = "continuous",
    method: str = "gmres",
    solver_refine: int = 1,
) -> KernelMatrix:
    """Run the plan's forward and adjoint solves and collect kernel rows.

    One forward solve per source and one adjoint solve per detector; rows
    are ordered detector-major.  `solver_refine` > 1 computes the solves on
    a nested grid with refine-times-smaller spacing and restricts gamma to
    the kernel grid, which sharpens the O(dx) entries without changing the
    system's size (the exact discrete duality holds only at refine 1).
    """
    _validate_kind(kind, problem)
    if solver_refine < 1:
        raise TransportError("solver_refine must be >= 1")
    solve_problem = problem if solver_refine == 1 else _refined_problem(problem, solver_refine)
    restrict = slice(None, None, solver_refine)

    fwd = assemble_operator(solve_problem, "forward")
    bwd = assemble_operator(solve_problem, "backward") if adjoint_mode == "continuous" else None
    adjoints = []
    for det in plan.detectors:
        data = _detector_data(solve_problem.quad, det)
        op = bwd if adjoint_mode == "continuous" else fwd
        adjoints.append(solve_adjoint(solve_problem, data, mode=adjoint_mode, method=method, operator=op))

    entries = np.zeros((plan.n_pairs, problem.grid.n_x))
    scale = problem.grid.weights if include_weights else 1.0
    for d, source in enumerate(plan.sources):
        try:
            f0 = solve_forward(solve_problem, source, method=method, operator=fwd)
        except Exception as exc:
            raise TransportError(f"forward solve failed for source {d}: {exc}") from exc
        for k in range(plan.n_detectors):
            gam = _gamma(kind, f0, adjoints[k], problem.kn)
            entries[plan.pair_index(k, d)] = gam[restrict] * scale
    return KernelMatrix(entries, problem.grid, kind, problem.kn, include_weights, plan)


def _linearized_source(kind: ProblemKind, perturbation: np.ndarray, f0: TransportSolution, kn: float) -> np.ndarray:
    """Volumetric source of the linearized equation for a coefficient bump."""
    if kind is ProblemKind.ABSORPTION:
        return -kn * perturbation[:, None] * f0.values
    w = f0.problem.quad.weights
    collided = (f0.values @ w)[:, None] - f0.values
    return (perturbation[:, None] / kn) * collided


def _perturbed_problem(kind: ProblemKind, problem: TransportProblem, perturbation: np.ndarray) -> TransportProblem:
    if kind is ProblemKind.ABSORPTION:
        sigma_a = CoefficientField(problem.sigma_a.values + perturbation, problem.grid)
        return TransportProblem(problem.grid, problem.quad, problem.sigma_s, sigma_a, problem.kn)
    sigma_s = CoefficientField(problem.sigma_s.values + perturbation, problem.grid)
    return TransportProblem(problem.grid, problem.quad, sigma_s, problem.sigma_a, problem.kn)


def synthesize_data(
    background: TransportProblem,
    perturbation: CoefficientField,
    plan: SourceDetectorPlan,
    kind: ProblemKind,
    mode: str = "nonlinear",
    method: str = "gmres",
) -> DataVector:
    """Measurement residuals for a known coefficient perturbation.

    nonlinear: solve with the perturbed and background coefficients and
    difference the measurements (what an experiment would record).
    linearized: solve the first-order fluctuation equation driven by the
    perturbation as a volumetric source, with zero inflow.
    """
    _validate_kind(kind, background)
    if perturbation.grid.n_x != background.grid.n_x:
        raise TransportError("perturbation is sampled on a different grid")
    if mode not in ("nonlinear", "linearized"):
        raise TransportError(f"mode must be 'nonlinear' or 'linearized', got {mode!r}")

    sign = kind.data_sign
    values = np.zeros(plan.n_pairs)
    fwd = assemble_operator(background, "forward")
    if mode == "nonlinear":
        perturbed = _perturbed_problem(kind, background, perturbation.values)
        fwd_p = assemble_operator(perturbed, "forward")
        for d, source in enumerate(plan.sources):
            f0 = solve_forward(background, source, method=method, operator=fwd)
            f1 = solve_forward(perturbed, source, method=method, operator=fwd_p)
            for k, det in enumerate(plan.detectors):
                residual = measure_outflow(f1, det) - measure_outflow(f0, det)
                values[plan.pair_index(k, d)] = sign * residual
    else:
        zero = BoundaryData.zero(background.quad)
        for d, source in enumerate(plan.sources):
            f0 = solve_forward(background, source, method=method, operator=fwd)
            src = _linearized_source(kind, perturbation.values, f0, background.kn)
            fluct = solve_forward(background, zero, source=src, method=method, operator=fwd)
            for k, det in enumerate(plan.detectors):
                values[plan.pair_index(k, d)] = sign * measure_outflow(fluct, det)
    return DataVector(values, kind, plan)


def duality_residual(
    problem: TransportProblem,
    plan: SourceDetectorPlan,
    pair: tuple,
    perturbation: CoefficientField,
    kind: ProblemKind,
    adjoint_mode: str = "algebraic",
    method: str = "gmres",
) -> float:
    """Relative gap between the kernel pairing and the linearized data.

    For one (detector k, source d) pair, returns
    |<gamma w, sigma~> - b_lin| / max(|b_lin|, floor).  With the algebraic
    adjoint the two sides agree to solver tolerance; with the continuous
    adjoint the gap is O(dx).
    """
    k, d = pair
    sub_plan = SourceDetectorPlan((plan.sources[d],), (plan.detectors[k],))
    kernel = assemble_kernel_matrix(
        problem, sub_plan, kind, include_weights=True, adjoint_mode=adjoint_mode, method=method
    )
    data = synthesize_data(problem, perturbation, sub_plan, kind, mode="linearized", method=method)
    pairing = float(kernel.entries[0] @ perturbation.values)
    b = float(data.values[0])
    floor = 1e-14 * np.abs(kernel.entries).max() * max(np.abs(perturbation.values).max(), 1.0)
    return abs(pairing - b) / max(abs(b), floor)


def kernel_to_csv(kernel: KernelMatrix, path) -> None:
    """Write the kernel with three grid-metadata rows before the pair rows."""
    grid = kernel.grid
    n_x = grid.n_x
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("i,," + ",".join(str(i) for i in range(n_x)) + "\n")
        fh.write("x_i,," + ",".join(f"{x:.17g}" for x in grid.nodes) + "\n")
        fh.write("w_i,," + ",".join(f"{w:.17g}" for w in grid.weights) + "\n")
        fh.write("k,d," + ",".join(f"A_{i+1}" for i in range(n_x)) + "\n")
        for p in range(kernel.plan.n_pairs):
            k, d = kernel.plan.pair(p)
            row = ",".join(f"{v:.17g}" for v in kernel.entries[p])
            fh.write(f"{k+1},{d+1},{row}\n")


def data_to_csv(data: DataVector, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,d,b\n")
        for p in range(data.plan.n_pairs):
            k, d = data.plan.pair(p)
            fh.write(f"{k+1},{d+1},{data.values[p]:.17g}\n")
