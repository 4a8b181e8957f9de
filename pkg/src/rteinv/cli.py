"""Command-line experiment runner.

Subcommands cover single solves (forward, adjoint, diffusion, halfspace),
kernel assembly and diagnostics (kernel, svd, flatness, ratio), inverse
experiments (reconstruct, sweep) and the full figure-data suite
(paper-figures).  Options may come from an INI config file (section
[rteinv]); command-line flags win.

Exit codes: 0 success, 2 usage or configuration error, 3 solver failure,
4 inline invariant check failure (--check).
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .conditioning import (
    condition_growth,
    flatness_check,
    ratio_check,
    svd_report,
    svd_to_csv,
    tikhonov_reconstruct,
    vectors_to_csv,
)
from .diffusion import (
    DiffusionProblem,
    HalfSpaceProblem,
    field_to_csv,
    halfspace_limit,
    halfspace_result_to_json,
    solve_diffusion,
)
from .fields import CoefficientField, FieldError
from .kernels import (
    KernelMatrix,
    ProblemKind,
    SourceDetectorPlan,
    assemble_kernel_matrix,
    duality_residual,
    gamma_scattering,
    kernel_to_csv,
    synthesize_data,
)
from .mesh import GridError, make_double_gauss_quadrature, make_gauss_quadrature, make_uniform_grid
from .presets import PresetError, get_preset, parse_expression
from .transport import (
    BoundaryData,
    SolverFailure,
    TransportError,
    TransportProblem,
    assemble_operator,
    measure_outflow,
    solve_adjoint,
    solve_forward,
    solution_to_csv,
    upwind_net_flux,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4

THREADS_ENV = "RTEINV_THREADS"

KIND_BY_NAME = {
    "absorption": ProblemKind.ABSORPTION,
    "scattering-critical": ProblemKind.SCATTERING_CRITICAL,
    "scattering-subcritical": ProblemKind.SCATTERING_SUBCRITICAL,
}
PRESET_BY_KIND = {
    ProblemKind.ABSORPTION: "abs-test",
    ProblemKind.SCATTERING_CRITICAL: "sca-critical",
    ProblemKind.SCATTERING_SUBCRITICAL: "sca-subcritical",
}
PAPER_KN = (0.25, 0.125, 0.0625)
ABS_INTERIOR_MARGIN = 0.30
SCA_INTERIOR_MARGIN = 0.056


class CheckFailure(RuntimeError):
    """An inline --check invariant did not hold."""


def thread_count() -> int:
    value = os.environ.get(THREADS_ENV, "")
    try:
        n = int(value)
        if n >= 1:
            return n
    except ValueError:
        pass
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# option plumbing


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--nx", type=int, default=200, help="spatial nodes (default 200)")
    p.add_argument("--nv", type=int, default=80, help="angular ordinates (default 80)")
    p.add_argument("--kn", type=float, default=0.25, help="Knudsen number (default 0.25)")
    p.add_argument("--preset", default=None,
                   help="coefficient preset: abs-test, sca-critical, sca-subcritical")
    p.add_argument("--sigma-s", dest="sigma_s", default=None,
                   help="scattering coefficient expression in x")
    p.add_argument("--sigma-a", dest="sigma_a", default=None,
                   help="absorption coefficient expression in x")
    p.add_argument("--quadrature", choices=("gauss", "double-gauss"), default="gauss")
    p.add_argument("--method", choices=("gmres", "direct", "dense"), default="gmres")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--check", action="store_true", help="assert invariants inline (exit 4 on failure)")


def _add_kind(p: argparse.ArgumentParser, default="absorption"):
    p.add_argument("--kind", choices=tuple(KIND_BY_NAME), default=default)
    p.add_argument("--plain-deltas", action="store_true",
                   help="use unit-coefficient velocity deltas instead of unit-integral ones")
    p.add_argument("--adjoint-mode", choices=("continuous", "algebraic"), default="continuous")
    p.add_argument("--include-weights", dest="include_weights", action="store_true", default=True)
    p.add_argument("--no-weights", dest="include_weights", action="store_false")
    p.add_argument("--solver-refine", type=int, default=1,
                   help="solve on a refine-times finer nested grid and restrict")


def make_quadrature(args):
    make = make_gauss_quadrature if args.quadrature == "gauss" else make_double_gauss_quadrature
    return make(args.nv)


def coefficient_fields(args, grid):
    """Resolve preset/expressions into sigma_s and sigma_a fields."""
    preset_name = args.preset
    if preset_name is None and args.sigma_s is None and args.sigma_a is None and getattr(args, "kind", None):
        preset_name = PRESET_BY_KIND[KIND_BY_NAME[args.kind]]
    if preset_name is not None:
        preset = get_preset(preset_name)
        sigma_s, sigma_a = preset.fields(grid)
    else:
        sigma_s = CoefficientField.from_callable(parse_expression(args.sigma_s or "1"), grid)
        sigma_a = CoefficientField.from_callable(parse_expression(args.sigma_a or "0"), grid)
    # explicit expressions override preset components
    if preset_name is not None and args.sigma_s is not None:
        sigma_s = CoefficientField.from_callable(parse_expression(args.sigma_s), grid)
    if preset_name is not None and args.sigma_a is not None:
        sigma_a = CoefficientField.from_callable(parse_expression(args.sigma_a), grid)
    return sigma_s, sigma_a


def build_problem(args):
    grid = make_uniform_grid(args.nx)
    quad = make_quadrature(args)
    sigma_s, sigma_a = coefficient_fields(args, grid)
    return TransportProblem(grid, quad, sigma_s, sigma_a, kn=args.kn)


def parse_inflow(spec: str, quad) -> BoundaryData:
    """Inflow specs: const:VALUE, delta:INDEX[:plain], zero."""
    parts = spec.split(":")
    if parts[0] == "zero":
        return BoundaryData.zero(quad)
    if parts[0] == "const" and len(parts) == 2:
        value = float(parts[1])
        return BoundaryData.isotropic(quad, value, value)
    if parts[0] == "delta" and len(parts) in (2, 3):
        normalized = not (len(parts) == 3 and parts[2] == "plain")
        return BoundaryData.velocity_delta(quad, int(parts[1]), normalized=normalized)
    raise PresetError(f"cannot parse inflow spec {spec!r}")


def build_plan(args, quad) -> SourceDetectorPlan:
    return SourceDetectorPlan.paper_plan(quad, normalized=not args.plain_deltas)


def outpath(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _ensure(condition: bool, message: str):
    if not condition:
        raise CheckFailure(message)


# ---------------------------------------------------------------------------
# subcommands


def cmd_forward(args) -> int:
    problem = build_problem(args)
    inflow = parse_inflow(args.inflow, problem.quad)
    solution = solve_forward(problem, inflow, method=args.method)
    solution_to_csv(solution, outpath(args, "solution.csv"))
    left = measure_outflow(solution, "left")
    right = measure_outflow(solution, "right")
    print(f"residual {solution.residual:.3e} ({solution.method})")
    print(f"outflow left {left:.12e} right {right:.12e}")
    if args.check:
        _ensure(solution.residual <= 1e-10, f"residual {solution.residual:.3e} above 1e-10")
        sup = max(inflow.left.max(), inflow.right.max())
        if inflow.left.min() >= 0 and inflow.right.min() >= 0:
            _ensure(solution.values.min() >= -1e-9, "negative values under nonnegative inflow")
            _ensure(solution.values.max() <= sup + 1e-9, "maximum principle violated")
        if np.all(problem.sigma_a.values == 0):
            phi = upwind_net_flux(solution)
            scale = max(np.abs(phi).max(), 1e-300)
            _ensure(np.abs(phi - phi[0]).max() <= 1e-8 * scale,
                    "critical-case conserved flux is not constant")
        print("checks passed")
    return EXIT_OK


def cmd_adjoint(args) -> int:
    problem = build_problem(args)
    data = BoundaryData.isotropic(problem.quad, 1.0, 0.0) if args.detector == "left" \
        else BoundaryData.isotropic(problem.quad, 0.0, 1.0)
    solution = solve_adjoint(problem, data, mode=args.adjoint_mode, method=args.method)
    solution_to_csv(solution, outpath(args, "adjoint.csv"))
    print(f"adjoint ({args.adjoint_mode}) residual {solution.residual:.3e}")
    return EXIT_OK


def cmd_kernel(args) -> int:
    problem = build_problem(args)
    kind = KIND_BY_NAME[args.kind]
    plan = build_plan(args, problem.quad)
    kernel = assemble_kernel_matrix(
        problem, plan, kind,
        include_weights=args.include_weights,
        adjoint_mode=args.adjoint_mode,
        method=args.method,
        solver_refine=args.solver_refine,
    )
    kernel_to_csv(kernel, outpath(args, "kernel.csv"))
    print(f"kernel {kernel.shape[0]} x {kernel.shape[1]} (kind {kind.value}, kn {args.kn})")
    if args.check:
        tilde = CoefficientField.from_callable(lambda x: 0.1 * np.sin(np.pi * x), problem.grid)
        residual = duality_residual(problem, plan, (0, 0), tilde, kind,
                                    adjoint_mode="algebraic", method=args.method)
        _ensure(residual <= 1e-8, f"duality residual {residual:.3e} above 1e-8")
        print(f"checks passed (duality residual {residual:.3e})")
    return EXIT_OK


def cmd_svd(args) -> int:
    problem = build_problem(args)
    kind = KIND_BY_NAME[args.kind]
    plan = build_plan(args, problem.quad)
    kernel = assemble_kernel_matrix(problem, plan, kind,
                                    include_weights=args.include_weights,
                                    adjoint_mode=args.adjoint_mode,
                                    method=args.method,
                                    solver_refine=args.solver_refine)
    report = svd_report(kernel, interior_only=args.interior_only,
                        layer_width_factor=args.layer_factor, margin=args.margin)
    svd_to_csv(report, outpath(args, "svd.csv"))
    vectors_to_csv(report, outpath(args, "vectors.csv"))
    s = report.singular_values
    print(f"rank {report.rank} at tau {report.tau:g}; s1 {s[0]:.6e} s3/s4 {s[2]/s[3]:.3e}")
    if args.check:
        matrix = kernel.interior(args.layer_factor, args.margin) if args.interior_only else kernel.entries
        u, sv, vt = np.linalg.svd(matrix, full_matrices=False)
        _ensure(np.abs(matrix - (u * sv) @ vt).max() <= 1e-10 * sv[0],
                "SVD reconstruction above 1e-10 * s1")
        gram = vt @ vt.T
        _ensure(np.abs(gram - np.eye(gram.shape[0])).max() <= 1e-10,
                "right singular vectors not orthonormal")
        print("checks passed")
    return EXIT_OK


def cmd_flatness(args) -> int:
    if args.kind != "scattering-critical":
        print("flatness measures the critical scattering kernel; pass --kind scattering-critical",
              file=sys.stderr)
        return EXIT_USAGE
    problem = build_problem(args)
    plan = build_plan(args, problem.quad)
    kernel = assemble_kernel_matrix(problem, plan, ProblemKind.SCATTERING_CRITICAL,
                                    include_weights=False,
                                    adjoint_mode=args.adjoint_mode,
                                    method=args.method,
                                    solver_refine=args.solver_refine)
    worst = max(flatness_check(row) for row in kernel.entries)
    print(f"{worst:.6e}")
    return EXIT_OK


def cmd_ratio(args) -> int:
    problem = build_problem(args)
    kind = KIND_BY_NAME[args.kind]
    if kind is not ProblemKind.SCATTERING_SUBCRITICAL:
        print("the derivative-ratio diagnostic needs --kind scattering-subcritical", file=sys.stderr)
        return EXIT_USAGE
    quad = problem.quad
    d = args.source_index if args.source_index is not None else int(np.argmax(quad.ordinates))
    source = BoundaryData.velocity_delta(quad, d, normalized=not args.plain_deltas)
    detector = args.detector
    fwd = assemble_operator(problem, "forward")
    f0 = solve_forward(problem, source, method=args.method, operator=fwd)
    det_data = BoundaryData.isotropic(quad, 1.0, 0.0) if detector == "left" \
        else BoundaryData.isotropic(quad, 0.0, 1.0)
    g = solve_adjoint(problem, det_data, mode=args.adjoint_mode, method=args.method)
    gamma = gamma_scattering(f0, g, problem.kn)
    rho_f = CoefficientField(f0.values @ quad.weights, problem.grid)
    rho_g = CoefficientField(g.values @ quad.weights, problem.grid)
    margin = args.margin
    if margin is None:
        # layer width in mean free paths: factor * kn / min sigma_s
        margin = args.layer_factor * problem.kn / problem.sigma_s.values.min()
    report = ratio_check(gamma, rho_f, rho_g, problem.sigma_s, problem.sigma_a, problem.kn,
                         margin=margin, derivative_floor=args.derivative_floor)
    with open(outpath(args, "ratio.csv"), "w", encoding="utf-8") as fh:
        fh.write("x,ratio,predicted\n")
        for i in np.flatnonzero(report.mask):
            fh.write(f"{report.x[i]:.17g},{report.ratio[i]:.17g},{report.predicted[i]:.17g}\n")
    print(f"median ratio {report.median_ratio:.6e}")
    print(f"worst relative deviation from prediction {report.worst_relative_error:.3%}")
    return EXIT_OK


def cmd_diffusion(args) -> int:
    grid = make_uniform_grid(args.nx)
    sigma_s, sigma_a = coefficient_fields(args, grid)
    problem = DiffusionProblem(grid, sigma_s, sigma_a, args.xi_left, args.xi_right)
    rho = solve_diffusion(problem)
    field_to_csv(rho, outpath(args, "diffusion.csv"))
    print(f"rho range [{rho.values.min():.6e}, {rho.values.max():.6e}]")
    if args.check:
        lo = min(args.xi_left, args.xi_right, 0.0)
        hi = max(args.xi_left, args.xi_right, 0.0)
        _ensure(rho.values.min() >= lo - 1e-12 and rho.values.max() <= hi + 1e-12,
                "diffusion maximum principle violated")
        print("checks passed")
    return EXIT_OK


def cmd_halfspace(args) -> int:
    quad = make_quadrature(args)
    if args.profile.startswith("const:"):
        value = float(args.profile.split(":", 1)[1])
        problem = HalfSpaceProblem.from_callable(quad, lambda v: np.full_like(v, value),
                                                 z_length=args.z_length, closure=args.closure,
                                                 n_z=args.n_z)
    elif args.profile == "linear":
        problem = HalfSpaceProblem.from_callable(quad, lambda v: v, z_length=args.z_length,
                                                 closure=args.closure, n_z=args.n_z)
    else:
        raise PresetError(f"cannot parse half-space profile {args.profile!r}")
    result = halfspace_limit(problem)
    payload = halfspace_result_to_json(result, outpath(args, "halfspace.json"))
    print(payload)
    if not result.converged:
        print(f"warning: xi changed by {result.sensitivity:.2%} when doubling Z", file=sys.stderr)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    problem = build_problem(args)
    kind = KIND_BY_NAME[args.kind]
    plan = build_plan(args, problem.quad)
    tilde = CoefficientField.from_callable(parse_expression(args.perturbation), problem.grid)
    kernel = assemble_kernel_matrix(problem, plan, kind,
                                    adjoint_mode=args.adjoint_mode, method=args.method)
    data = synthesize_data(problem, tilde, plan, kind, mode=args.data_mode, method=args.method)
    rng = np.random.default_rng(args.seed)
    b = data.values.copy()
    if args.noise > 0:
        direction = rng.standard_normal(b.size)
        b += args.noise * np.linalg.norm(b) * direction / np.linalg.norm(direction)
    s1 = np.linalg.svd(kernel.entries, compute_uv=False)[0]
    lams = np.logspace(np.log10(args.lambda_min_factor), np.log10(args.lambda_max_factor),
                       args.lambda_count) * s1**2
    best_err, best_lam, best_rec = np.inf, None, None
    rows = []
    for lam in lams:
        rec = tikhonov_reconstruct(kernel, b, lam)
        err = np.linalg.norm(rec.values - tilde.values) / np.linalg.norm(tilde.values)
        rows.append((lam, err))
        if err < best_err:
            best_err, best_lam, best_rec = err, lam, rec
    with open(outpath(args, "lambda_sweep.csv"), "w", encoding="utf-8") as fh:
        fh.write("lambda,relative_error\n")
        for lam, err in rows:
            fh.write(f"{lam:.17g},{err:.17g}\n")
    with open(outpath(args, "reconstruction.csv"), "w", encoding="utf-8") as fh:
        fh.write("x,true,reconstructed\n")
        for x, t, r in zip(problem.grid.nodes, tilde.values, best_rec.values):
            fh.write(f"{x:.17g},{t:.17g},{r:.17g}\n")
    print(f"best lambda {best_lam:.6e} relative error {best_err:.6f}")
    return EXIT_OK


def _sweep_point(args, kn):
    point = argparse.Namespace(**vars(args))
    point.kn = kn
    problem = build_problem(point)
    plan = build_plan(point, problem.quad)
    kind = KIND_BY_NAME[args.kind]
    kernel = assemble_kernel_matrix(problem, plan, kind,
                                    adjoint_mode=args.adjoint_mode,
                                    method=args.method,
                                    solver_refine=args.solver_refine)
    return kernel


def cmd_sweep(args) -> int:
    kns = [float(v) for v in args.kn_list.split(",")]
    if not kns:
        raise PresetError("empty --kn-list")
    with ThreadPoolExecutor(max_workers=min(thread_count(), len(kns))) as pool:
        kernels = list(pool.map(lambda kn: _sweep_point(args, kn), kns))
    for kn, kernel in zip(kns, kernels):
        report = svd_report(kernel, interior_only=args.interior_only,
                            layer_width_factor=args.layer_factor, margin=args.margin)
        svd_to_csv(report, outpath(args, f"svd_kn_{kn:g}.csv"))
    table = condition_growth(kernels, kns, tier=args.tier,
                             interior_only=args.interior_only,
                             layer_width_factor=args.layer_factor, margin=args.margin)
    with open(outpath(args, "condition.csv"), "w", encoding="utf-8") as fh:
        fh.write("kn,cond\n")
        for kn, cond in zip(table.kn_values, table.conditions):
            fh.write(f"{kn:.17g},{cond:.17g}\n")
    print(f"condition slope vs 1/kn: {table.slope:.3f} "
          f"(monotone increasing: {table.monotone_increasing})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# paper figure data


def _sign_fix(vectors: np.ndarray) -> np.ndarray:
    fixed = vectors.copy()
    for i in range(fixed.shape[0]):
        j = int(np.argmax(np.abs(fixed[i])))
        if fixed[i, j] < 0:
            fixed[i] *= -1.0
    return fixed


def _figure_kernel(args, kind: ProblemKind, kn: float) -> KernelMatrix:
    point = argparse.Namespace(**vars(args))
    point.kn = kn
    point.kind = {v: k for k, v in KIND_BY_NAME.items()}[kind]
    point.preset = PRESET_BY_KIND[kind]
    point.sigma_s = None
    point.sigma_a = None
    problem = build_problem(point)
    plan = SourceDetectorPlan.paper_plan(problem.quad, normalized=not args.plain_deltas)
    return assemble_kernel_matrix(problem, plan, kind, adjoint_mode="continuous",
                                  method=args.method)


def _write_spectra_csv(path, kn_values, spectra):
    depth = min(len(s) for s in spectra)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index," + ",".join(f"kn=2^{int(np.log2(kn))}" for kn in kn_values) + "\n")
        for i in range(depth):
            fh.write(str(i + 1) + "," + ",".join(f"{s[i]:.17g}" for s in spectra) + "\n")


def _write_vectors_csv(path, blocks):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("kn,x,v1,v2,v3\n")
        for kn, xs, vecs in blocks:
            for i, x in enumerate(xs):
                fh.write(f"{kn:.17g},{x:.17g},"
                         + ",".join(f"{vecs[j, i]:.17g}" for j in range(3)) + "\n")


def cmd_paper_figures(args) -> int:
    if args.from_manifest:
        with open(args.from_manifest, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        for key, value in manifest["options"].items():
            setattr(args, key, value)
    kn_values = [float(v) for v in args.kn_list.split(",")]
    files = []

    # absorption kernel spectra and vectors (interior part carries the
    # rank-3 structure; boundary-layer columns are excluded)
    abs_spectra, abs_vec_blocks = [], []
    for kn in kn_values:
        kernel = _figure_kernel(args, ProblemKind.ABSORPTION, kn)
        report = svd_report(kernel, interior_only=True, margin=ABS_INTERIOR_MARGIN)
        abs_spectra.append(report.singular_values)
        abs_vec_blocks.append((kn, report.column_positions, _sign_fix(report.right_vectors[:3])))
    _write_spectra_csv(outpath(args, "fig1.csv"), kn_values, abs_spectra)
    files.append("fig1.csv")
    _write_vectors_csv(outpath(args, "fig2.csv"), abs_vec_blocks)
    files.append("fig2.csv")

    # critical kernel heatmap data at kn = 1
    crit = argparse.Namespace(**vars(args))
    crit.kn = 1.0
    crit.kind = "scattering-critical"
    crit.preset = "sca-critical"
    crit.sigma_s = None
    crit.sigma_a = None
    problem = build_problem(crit)
    plan = SourceDetectorPlan.paper_plan(problem.quad, normalized=not args.plain_deltas)
    kernel = assemble_kernel_matrix(problem, plan, ProblemKind.SCATTERING_CRITICAL,
                                    include_weights=False, method=args.method)
    with open(outpath(args, "fig3.csv"), "w", encoding="utf-8") as fh:
        fh.write("p,i,x,value\n")
        for p in range(kernel.shape[0]):
            for i in range(kernel.shape[1]):
                fh.write(f"{p+1},{i+1},{kernel.grid.nodes[i]:.17g},{kernel.entries[p, i]:.17g}\n")
    files.append("fig3.csv")

    # derivative-ratio data: resolved solver grids, matched cell depth
    with open(outpath(args, "fig4.csv"), "w", encoding="utf-8") as fh:
        fh.write("kn,x,ratio,predicted\n")
        for kn in kn_values:
            point = argparse.Namespace(**vars(args))
            point.kind = "scattering-subcritical"
            point.preset = "sca-subcritical"
            point.sigma_s = None
            point.sigma_a = None
            point.kn = kn
            point.nv = args.ratio_nv
            point.nx = int(round(args.ratio_depth_nodes * PAPER_KN[0] / kn)) + 1
            problem = build_problem(point)
            quad = problem.quad
            d = int(np.argmax(quad.ordinates))
            f0 = solve_forward(problem, BoundaryData.velocity_delta(quad, d), method=args.method)
            g = solve_adjoint(problem, BoundaryData.isotropic(quad, 1.0, 0.0),
                              mode="continuous", method=args.method)
            gamma = gamma_scattering(f0, g, kn)
            rho_f = CoefficientField(f0.values @ quad.weights, problem.grid)
            rho_g = CoefficientField(g.values @ quad.weights, problem.grid)
            margin = 5.0 * kn / problem.sigma_s.values.min()
            report = ratio_check(gamma, rho_f, rho_g, problem.sigma_s, problem.sigma_a, kn,
                                 margin=margin, derivative_floor=1e-2)
            for i in np.flatnonzero(report.mask):
                fh.write(f"{kn:.17g},{report.x[i]:.17g},{report.ratio[i]:.17g},"
                         f"{report.predicted[i]:.17g}\n")
    files.append("fig4.csv")

    # interior scattering kernel spectra and vectors
    sca_spectra, sca_vec_blocks = [], []
    for kn in kn_values:
        kernel = _figure_kernel(args, ProblemKind.SCATTERING_SUBCRITICAL, kn)
        report = svd_report(kernel, interior_only=True, margin=SCA_INTERIOR_MARGIN)
        sca_spectra.append(report.singular_values)
        sca_vec_blocks.append((kn, report.column_positions, _sign_fix(report.right_vectors[:3])))
    _write_spectra_csv(outpath(args, "fig5.csv"), kn_values, sca_spectra)
    files.append("fig5.csv")
    _write_vectors_csv(outpath(args, "fig6.csv"), sca_vec_blocks)
    files.append("fig6.csv")

    manifest = {
        "command": "paper-figures",
        "version": __version__,
        "options": {
            "nx": args.nx,
            "nv": args.nv,
            "kn_list": args.kn_list,
            "method": args.method,
            "quadrature": args.quadrature,
            "plain_deltas": args.plain_deltas,
            "ratio_nv": args.ratio_nv,
            "ratio_depth_nodes": args.ratio_depth_nodes,
        },
        "interior_margins": {"absorption": ABS_INTERIOR_MARGIN,
                             "scattering": SCA_INTERIOR_MARGIN},
        "files": files,
    }
    with open(outpath(args, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print("wrote " + ", ".join(files + ["manifest.json"]) + f" to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rteinv",
        description="1-D slab transport experiments: forward/adjoint solves, "
                    "Fredholm kernel assembly and conditioning diagnostics.",
    )
    parser.add_argument("--version", action="version", version=f"rteinv {__version__}")
    parser.add_argument("--config", default=None, help="INI file with a [rteinv] section")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    p = sub.add_parser("forward", help="solve the forward problem")
    _add_common(p)
    p.add_argument("--inflow", default="const:1", help="const:V, delta:INDEX[:plain] or zero")
    p.set_defaults(func=cmd_forward)
    subparsers["forward"] = p

    p = sub.add_parser("adjoint", help="solve the adjoint problem for one detector")
    _add_common(p)
    p.add_argument("--detector", choices=("left", "right"), default="right")
    p.add_argument("--adjoint-mode", choices=("continuous", "algebraic"), default="continuous")
    p.set_defaults(func=cmd_adjoint)
    subparsers["adjoint"] = p

    p = sub.add_parser("kernel", help="assemble the sensitivity kernel matrix")
    _add_common(p)
    _add_kind(p)
    p.set_defaults(func=cmd_kernel)
    subparsers["kernel"] = p

    p = sub.add_parser("svd", help="singular values and vectors of the kernel")
    _add_common(p)
    _add_kind(p)
    p.add_argument("--interior-only", action="store_true")
    p.add_argument("--layer-factor", type=float, default=5.0)
    p.add_argument("--margin", type=float, default=None)
    p.set_defaults(func=cmd_svd)
    subparsers["svd"] = p

    p = sub.add_parser("flatness", help="worst relative row variation of the critical kernel")
    _add_common(p)
    _add_kind(p, default="scattering-critical")
    p.set_defaults(func=cmd_flatness, kn=1.0)
    subparsers["flatness"] = p

    p = sub.add_parser("ratio", help="derivative ratio against the subcritical prediction")
    _add_common(p)
    _add_kind(p, default="scattering-subcritical")
    p.add_argument("--source-index", type=int, default=None)
    p.add_argument("--detector", choices=("left", "right"), default="left")
    p.add_argument("--layer-factor", type=float, default=5.0)
    p.add_argument("--margin", type=float, default=None)
    p.add_argument("--derivative-floor", type=float, default=1e-2)
    p.set_defaults(func=cmd_ratio)
    subparsers["ratio"] = p

    p = sub.add_parser("diffusion", help="solve the limiting diffusion problem")
    _add_common(p)
    p.add_argument("--xi-left", type=float, default=1.0)
    p.add_argument("--xi-right", type=float, default=1.0)
    p.set_defaults(func=cmd_diffusion)
    subparsers["diffusion"] = p

    p = sub.add_parser("halfspace", help="truncated half-space boundary-layer value")
    _add_common(p)
    p.add_argument("--profile", default="const:1", help="const:V or linear (phi(v)=v)")
    p.add_argument("--z-length", type=float, default=50.0)
    p.add_argument("--closure", choices=("reflective", "average-matching"), default="reflective")
    p.add_argument("--n-z", type=int, default=400)
    p.set_defaults(func=cmd_halfspace)
    subparsers["halfspace"] = p

    p = sub.add_parser("reconstruct", help="Tikhonov recovery of a synthetic perturbation")
    _add_common(p)
    _add_kind(p)
    p.add_argument("--perturbation", default="0.1*sin(pi*x)")
    p.add_argument("--data-mode", choices=("nonlinear", "linearized"), default="nonlinear")
    p.add_argument("--noise", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--lambda-min-factor", type=float, default=1e-12)
    p.add_argument("--lambda-max-factor", type=float, default=1e-2)
    p.add_argument("--lambda-count", type=int, default=11)
    p.set_defaults(func=cmd_reconstruct)
    subparsers["reconstruct"] = p

    p = sub.add_parser("sweep", help="kernel spectra and condition growth over kn values")
    _add_common(p)
    _add_kind(p)
    p.add_argument("--kn-list", default="0.25,0.125,0.0625")
    p.add_argument("--interior-only", action="store_true")
    p.add_argument("--layer-factor", type=float, default=5.0)
    p.add_argument("--margin", type=float, default=None)
    p.add_argument("--tier", type=int, default=4)
    p.set_defaults(func=cmd_sweep)
    subparsers["sweep"] = p

    p = sub.add_parser("paper-figures", help="write fig1..fig6 data and a manifest")
    _add_common(p)
    p.add_argument("--plain-deltas", action="store_true")
    p.add_argument("--kn-list", default="0.25,0.125,0.0625")
    p.add_argument("--ratio-nv", type=int, default=16)
    p.add_argument("--ratio-depth-nodes", type=int, default=2400,
                   help="ratio solver nodes at the largest kn; scaled as 1/kn")
    p.add_argument("--from-manifest", default=None)
    p.set_defaults(func=cmd_paper_figures)
    subparsers["paper-figures"] = p

    return parser, subparsers


def _apply_config(path, subparsers):
    config = configparser.ConfigParser()
    if not config.read(path):
        raise PresetError(f"cannot read config file {path!r}")
    if not config.has_section("rteinv"):
        raise PresetError(f"config file {path!r} has no [rteinv] section")
    values = {}
    for key, raw in config.items("rteinv"):
        dest = key.replace("-", "_")
        if raw.lower() in ("true", "false"):
            values[dest] = raw.lower() == "true"
            continue
        try:
            values[dest] = int(raw)
        except ValueError:
            try:
                values[dest] = float(raw)
            except ValueError:
                values[dest] = raw
    for p in subparsers.values():
        known = {action.dest for action in p._actions}
        p.set_defaults(**{k: v for k, v in values.items() if k in known})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    # peek at --config so file values become defaults that flags override
    peek = argparse.ArgumentParser(add_help=False)
    peek.add_argument("--config", default=None)
    known, _ = peek.parse_known_args(argv)
    if known.config:
        try:
            _apply_config(known.config, subparsers)
        except PresetError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except SolverFailure as exc:
        print(f"solver failure in {args.command}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (PresetError, TransportError, GridError, FieldError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
