"""Spectral and stability diagnostics for the assembled kernel systems."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .diffusion import greens_functions
from .fields import CoefficientField
from .kernels import KernelMatrix
from .mesh import SpatialGrid
from .transport import TransportError

__all__ = [
    "SvdReport",
    "DistinguishabilityReport",
    "RankReport",
    "ConditionTable",
    "RatioReport",
    "svd_report",
    "condition_growth",
    "estimate_distinguishability",
    "greens_rank_check",
    "tikhonov_reconstruct",
    "flatness_check",
    "ratio_check",
    "svd_to_csv",
    "vectors_to_csv",
    "distinguishability_to_json",
]

MACHINE_FLOOR = np.finfo(float).eps


def _as_matrix(A: Union[KernelMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(A, KernelMatrix):
        return A.entries
    return np.asarray(A, dtype=float)


@dataclass(frozen=True)
class SvdReport:
    """Singular values, right singular vectors and numerical rank."""

    singular_values: np.ndarray
    right_vectors: np.ndarray  # one row per singular direction, over kept columns
    column_positions: np.ndarray
    tau: float
    rank: int

    def gap(self, i: int, j: int) -> float:
        """log2 of s_i / s_j (1-based indices)."""
        return float(np.log2(self.singular_values[i - 1] / self.singular_values[j - 1]))


@dataclass(frozen=True)
class DistinguishabilityReport:
    """Worst relative coefficient error compatible with a data tolerance.

    The estimate restricts perturbations to the row space of the system
    (components in the null space are invisible to the data, making the
    unrestricted supremum infinite for any wide matrix); kappa_hat is then
    delta / (s_min ||sigma~||), attained along the minimal right singular
    direction.
    """

    delta: float
    kappa_hat: float
    smin: float
    norm_sigma: float
    worst_perturbation: np.ndarray
    worst_perturbation_max: float


@dataclass(frozen=True)
class RankReport:
    singular_values: np.ndarray
    tau: float
    rank: int
    rank_le_3: bool


@dataclass(frozen=True)
class ConditionTable:
    kn_values: np.ndarray
    conditions: np.ndarray
    tier: int
    slope: float
    monotone_increasing: bool
    overflow: np.ndarray  # flags where s_tier fell below the machine floor


@dataclass(frozen=True)
class RatioReport:
    """Pointwise derivative ratio against its predicted profile."""

    ratio: np.ndarray  # nan outside the evaluation mask
    predicted: np.ndarray
    mask: np.ndarray
    x: np.ndarray

    @property
    def median_ratio(self) -> float:
        return float(np.median(self.ratio[self.mask]))

    @property
    def worst_relative_error(self) -> float:
        rel = np.abs(self.ratio[self.mask] - self.predicted[self.mask]) / np.abs(
            self.predicted[self.mask]
        )
        return float(rel.max())


def svd_report(
    A: Union[KernelMatrix, np.ndarray],
    interior_only: bool = False,
    layer_width_factor: float = 5.0,
    margin: Optional[float] = None,
    tau: float = 1e-8,
) -> SvdReport:
    """Full SVD of the kernel (or of its interior-column submatrix)."""
    if interior_only:
        if not isinstance(A, KernelMatrix):
            raise TransportError("interior_only needs a KernelMatrix with a grid")
        cols = A.interior_columns(layer_width_factor, margin)
        matrix = A.entries[:, cols]
        positions = A.grid.nodes[cols]
    else:
        matrix = _as_matrix(A)
        positions = (
            A.grid.nodes if isinstance(A, KernelMatrix) else np.arange(matrix.shape[1], dtype=float)
        )
    _, s, vt = np.linalg.svd(matrix, full_matrices=False)
    rank = int(np.sum(s > tau * s[0])) if s.size and s[0] > 0 else 0
    return SvdReport(s, vt, positions, tau, rank)


def condition_growth(
    kernels: Sequence[Union[KernelMatrix, np.ndarray]],
    kn_values: Optional[Sequence[float]] = None,
    tier: int = 4,
    interior_only: bool = False,
    layer_width_factor: float = 5.0,
    margin: Optional[float] = None,
) -> ConditionTable:
    """cond(A^T A) = (s_1 / s_min)^2 across a Knudsen sweep.

    The rectangular systems are rank deficient in exact arithmetic beyond
    the leading cluster, so s_min is taken as the singular value just past
    the theoretical rank-3 cluster (tier 4 by default) rather than the raw
    smallest, which sits at the machine-noise floor.  The slope is the
    log-log fit of the condition number against 1/kn.
    """
    if len(kernels) < 2:
        raise TransportError("condition growth needs at least two Knudsen points")
    if kn_values is None:
        if not all(isinstance(k, KernelMatrix) for k in kernels):
            raise TransportError("kn_values required for plain arrays")
        kn_values = [k.kn for k in kernels]
    kns = np.asarray(list(kn_values), dtype=float)
    conds = np.zeros(len(kernels))
    overflow = np.zeros(len(kernels), dtype=bool)
    for i, A in enumerate(kernels):
        rep = svd_report(A, interior_only=interior_only,
                         layer_width_factor=layer_width_factor, margin=margin)
        s = rep.singular_values
        if tier > s.size:
            raise TransportError(f"tier {tier} exceeds the spectrum length {s.size}")
        smin = s[tier - 1]
        if smin <= MACHINE_FLOOR * max(A.shape if hasattr(A, "shape") else (1,)) * s[0]:
            conds[i] = np.inf
            overflow[i] = True
        else:
            conds[i] = (s[0] / smin) ** 2
    finite = np.isfinite(conds)
    if finite.sum() >= 2:
        slope = float(np.polyfit(np.log(1.0 / kns[finite]), np.log(conds[finite]), 1)[0])
    else:
        slope = np.inf
    order = np.argsort(-kns)  # from largest kn toward the diffusion limit
    monotone = bool(np.all(np.diff(conds[order]) > 0))
    return ConditionTable(kns, conds, tier, slope, monotone, overflow)


def estimate_distinguishability(
    A: Union[KernelMatrix, np.ndarray],
    sigma_tilde: Union[CoefficientField, np.ndarray],
    delta: float,
) -> DistinguishabilityReport:
    """Worst-case relative recovery error for data perturbed within delta."""
    if delta < 0:
        raise TransportError("delta must be nonnegative")
    matrix = _as_matrix(A)
    sigma = np.asarray(sigma_tilde, dtype=float)
    norm_sigma = float(np.linalg.norm(sigma))
    if norm_sigma == 0:
        raise TransportError("sigma~ must be nonzero")
    _, s, vt = np.linalg.svd(matrix, full_matrices=False)
    smin = float(s[-1])
    if smin <= MACHINE_FLOOR * max(matrix.shape) * s[0]:
        return DistinguishabilityReport(
            delta, np.inf, smin, norm_sigma, np.full(matrix.shape[1], np.nan), np.inf
        )
    worst = (delta / smin) * vt[-1]
    return DistinguishabilityReport(
        delta=delta,
        kappa_hat=delta / (smin * norm_sigma),
        smin=smin,
        norm_sigma=norm_sigma,
        worst_perturbation=worst,
        worst_perturbation_max=float(np.abs(worst).max()),
    )


def greens_rank_check(
    sigma_s0: CoefficientField,
    sigma_a0: CoefficientField,
    grid: SpatialGrid,
    mode: str = "diffusion_products",
    boundary_pairs: Optional[Sequence] = None,
    n_pairs: int = 50,
    seed: int = 0,
    tau: float = 1e-8,
    include_weights: bool = True,
) -> RankReport:
    """Numerical rank of the product matrix built from the Green's pair.

    Rows sample rho_f * rho_g (or the product of their derivatives) where
    rho_f, rho_g are diffusion solutions with the given boundary data; the
    two-point boundary structure confines them to a three-dimensional
    function space.
    """
    if mode not in ("diffusion_products", "gradient_products"):
        raise TransportError(f"unknown mode {mode!r}")
    pair = greens_functions(sigma_s0, sigma_a0, grid)
    g1, g2 = pair.g1.values, pair.g2.values
    if mode == "gradient_products":
        g1 = np.gradient(g1, grid.nodes)
        g2 = np.gradient(g2, grid.nodes)
    if boundary_pairs is None:
        rng = np.random.default_rng(seed)
        boundary_pairs = rng.uniform(0.0, 1.0, size=(n_pairs, 4))
    rows = []
    for fl, fr, gl, gr in boundary_pairs:
        rho_f = fl * g1 + fr * g2
        rho_g = gl * g1 + gr * g2
        rows.append(rho_f * rho_g * (grid.weights if include_weights else 1.0))
    matrix = np.array(rows)
    s = np.linalg.svd(matrix, compute_uv=False)
    rank = int(np.sum(s > tau * s[0])) if s[0] > 0 else 0
    return RankReport(s, tau, rank, bool(rank <= 3))


def tikhonov_reconstruct(
    A: Union[KernelMatrix, np.ndarray],
    b: np.ndarray,
    lam: float,
) -> Union[CoefficientField, np.ndarray]:
    """Minimizer of ||A sigma - b||^2 + lam ||sigma||^2 via SVD filtering."""
    if lam < 0:
        raise TransportError("lambda must be nonnegative")
    matrix = _as_matrix(A)
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    if lam == 0 and s[-1] <= MACHINE_FLOOR * max(matrix.shape) * s[0]:
        raise TransportError("lambda = 0 with a singular system")
    filters = s / (s**2 + lam)
    coefficients = vt.T @ (filters * (u.T @ np.asarray(b, dtype=float)))
    if isinstance(A, KernelMatrix):
        return CoefficientField(coefficients, A.grid)
    return coefficients


def flatness_check(gamma: Union[CoefficientField, np.ndarray]) -> float:
    """Relative variation max|gamma - mean| / |mean| of one kernel row."""
    values = np.asarray(gamma, dtype=float)
    mean = values.mean()
    if mean == 0:
        raise TransportError("degenerate kernel row: zero mean")
    return float(np.abs(values - mean).max() / abs(mean))


def ratio_check(
    gamma: Union[CoefficientField, np.ndarray],
    rho_f: Union[CoefficientField, np.ndarray],
    rho_g: Union[CoefficientField, np.ndarray],
    sigma_s0: Union[CoefficientField, np.ndarray],
    sigma_a: Union[CoefficientField, np.ndarray],
    kn: float,
    x: Optional[np.ndarray] = None,
    layer_width_factor: float = 5.0,
    margin: Optional[float] = None,
    derivative_floor: float = 1e-6,
) -> RatioReport:
    """Pointwise (d gamma/dx) / (d(rho_f rho_g)/dx) against the prediction
    kn / (kn^2 + sigma_s0/sigma_a), with centered differences.

    Nodes inside the boundary strip and nodes where the product derivative
    falls under `derivative_floor` times its maximum are excluded.
    """
    if x is None:
        if not isinstance(gamma, CoefficientField):
            raise TransportError("pass x explicitly for plain arrays")
        x = gamma.grid.nodes
    gam = np.asarray(gamma, dtype=float)
    product = np.asarray(rho_f, dtype=float) * np.asarray(rho_g, dtype=float)
    sa = np.asarray(sigma_a, dtype=float)
    if np.any(sa <= 0):
        raise TransportError("the derivative ratio needs sigma_a > 0 (subcritical)")
    d_gamma = np.gradient(gam, x)
    d_product = np.gradient(product, x)
    predicted = kn / (kn**2 + np.asarray(sigma_s0, dtype=float) / sa)
    width = layer_width_factor * kn if margin is None else margin
    mask = np.minimum(x, 1.0 - x) > width
    mask &= np.abs(d_product) >= derivative_floor * np.abs(d_product).max()
    if not np.any(mask):
        raise TransportError("no interior nodes survive the layer and derivative exclusions")
    ratio = np.full_like(gam, np.nan)
    ratio[mask] = d_gamma[mask] / d_product[mask]
    return RatioReport(ratio, predicted, mask, np.asarray(x))


def svd_to_csv(report: SvdReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index,singular_value\n")
        for i, s in enumerate(report.singular_values, start=1):
            fh.write(f"{i},{s:.17g}\n")


def vectors_to_csv(report: SvdReport, path, count: int = 3) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x," + ",".join(f"v{i+1}" for i in range(count)) + "\n")
        for i, xval in enumerate(report.column_positions):
            row = ",".join(f"{report.right_vectors[j, i]:.17g}" for j in range(count))
            fh.write(f"{xval:.17g},{row}\n")


def distinguishability_to_json(report: DistinguishabilityReport, path=None) -> str:
    payload = json.dumps(
        {
            "delta": report.delta,
            "kappa_hat": report.kappa_hat,
            "smin": report.smin,
            "norm_sigma": report.norm_sigma,
        },
        indent=2,
    )
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    return payload
