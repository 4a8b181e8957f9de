"""1-D slab transport solvers and conditioning diagnostics for the
linearized inverse problem across the diffusive scaling.

Modules
-------
mesh
    Spatial grids on [0,1] and angular quadratures on [-1,1].
fields
    Scalar coefficient fields sampled on a grid.
transport
    Discrete-ordinates forward/adjoint solves and boundary measurements.
diffusion
    Small-Knudsen limiting objects: diffusion solves, Green's function
    pairs, truncated half-space problems, interior-error diagnostics.
kernels
    Fredholm sensitivity kernels and the discrete linear system relating
    coefficient perturbations to measurement residuals.
conditioning
    SVD spectra, condition-number growth, distinguishability estimates,
    Green's-product rank checks and Tikhonov reconstruction.
presets
    Named coefficient functions and a small expression language.
cli
    Command-line experiment runner.
"""

__version__ = "0.1.0"

from .conditioning import (
    ConditionTable,
    DistinguishabilityReport,
    RankReport,
    RatioReport,
    SvdReport,
    condition_growth,
    estimate_distinguishability,
    flatness_check,
    greens_rank_check,
    ratio_check,
    svd_report,
    tikhonov_reconstruct,
)
from .diffusion import (
    DIFFUSION_COEFFICIENT,
    DiffusionProblem,
    GreensPair,
    HalfSpaceProblem,
    HalfSpaceResult,
    greens_functions,
    halfspace_limit,
    interior_error,
    solve_diffusion,
)
from .fields import CoefficientField, FieldError, angular_average
from .kernels import (
    DataVector,
    KernelMatrix,
    ProblemKind,
    SourceDetectorPlan,
    assemble_kernel_matrix,
    duality_residual,
    gamma_absorption,
    gamma_scattering,
    synthesize_data,
)
from .mesh import (
    AngularQuadrature,
    GridError,
    SpatialGrid,
    make_double_gauss_quadrature,
    make_gauss_quadrature,
    make_uniform_grid,
)
from .presets import COEFFICIENT_PRESETS, PresetError, get_preset, parse_expression
from .transport import (
    BoundaryData,
    DiscreteTransportOperator,
    SolverFailure,
    TransportError,
    TransportProblem,
    TransportSolution,
    assemble_operator,
    measure_outflow,
    net_flux,
    solve_adjoint,
    solve_forward,
    upwind_net_flux,
)

__all__ = [
    "__version__",
    "AngularQuadrature",
    "BoundaryData",
    "COEFFICIENT_PRESETS",
    "CoefficientField",
    "ConditionTable",
    "DIFFUSION_COEFFICIENT",
    "DataVector",
    "DiffusionProblem",
    "DiscreteTransportOperator",
    "DistinguishabilityReport",
    "FieldError",
    "GreensPair",
    "GridError",
    "HalfSpaceProblem",
    "HalfSpaceResult",
    "KernelMatrix",
    "PresetError",
    "ProblemKind",
    "RankReport",
    "RatioReport",
    "SolverFailure",
    "SourceDetectorPlan",
    "SpatialGrid",
    "SvdReport",
    "TransportError",
    "TransportProblem",
    "TransportSolution",
    "angular_average",
    "assemble_kernel_matrix",
    "assemble_operator",
    "condition_growth",
    "duality_residual",
    "estimate_distinguishability",
    "flatness_check",
    "gamma_absorption",
    "gamma_scattering",
    "get_preset",
    "greens_functions",
    "greens_rank_check",
    "halfspace_limit",
    "interior_error",
    "make_double_gauss_quadrature",
    "make_gauss_quadrature",
    "make_uniform_grid",
    "measure_outflow",
    "net_flux",
    "parse_expression",
    "ratio_check",
    "solve_adjoint",
    "solve_diffusion",
    "solve_forward",
    "svd_report",
    "synthesize_data",
    "tikhonov_reconstruct",
    "upwind_net_flux",
]
