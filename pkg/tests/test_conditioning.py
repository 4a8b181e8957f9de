import json

import numpy as np
import pytest

from rteinv import (
    CoefficientField,
    ProblemKind,
    SourceDetectorPlan,
    TransportError,
    condition_growth,
    estimate_distinguishability,
    flatness_check,
    get_preset,
    greens_functions,
    greens_rank_check,
    make_uniform_grid,
    ratio_check,
    svd_report,
    tikhonov_reconstruct,
    assemble_kernel_matrix,
)
from rteinv.conditioning import distinguishability_to_json, svd_to_csv, vectors_to_csv

from conftest import preset_problem


class TestSvdReport:
    def test_rank_one_outer_product(self, rng):
        u = rng.standard_normal(12)
        v = rng.standard_normal(20)
        report = svd_report(np.outer(u, v))
        assert report.rank == 1
        s = report.singular_values
        assert np.sum(s > 10 * s[3]) == 1

    def test_reconstruction_identity(self, rng):
        matrix = rng.standard_normal((160, 200))
        u, s, vt = np.linalg.svd(matrix, full_matrices=False)
        assert np.abs((u * s) @ vt - matrix).max() <= 1e-10 * s[0]

    def test_orthonormal_vectors(self, rng):
        report = svd_report(rng.standard_normal((15, 30)))
        gram = report.right_vectors @ report.right_vectors.T
        assert np.abs(gram - np.eye(gram.shape[0])).max() <= 1e-10

    def test_interior_needs_kernel(self, rng):
        with pytest.raises(TransportError):
            svd_report(rng.standard_normal((4, 6)), interior_only=True)


class TestConditionGrowth:
    def test_identity_condition_one(self):
        table = condition_growth([np.eye(6), np.eye(6)], kn_values=[0.5, 0.25])
        assert np.allclose(table.conditions, 1.0)

    def test_scaling_invariance(self, rng):
        matrix = rng.standard_normal((8, 10))
        table = condition_growth([matrix, 2.0 * matrix], kn_values=[0.5, 0.25])
        assert table.conditions[0] == pytest.approx(table.conditions[1], rel=1e-12)

    def test_needs_two_points(self, rng):
        with pytest.raises(TransportError):
            condition_growth([rng.standard_normal((4, 4))], kn_values=[0.5])

    def test_overflow_sentinel(self):
        degenerate = np.zeros((5, 5))
        degenerate[0, 0] = 1.0
        table = condition_growth([degenerate, np.eye(5)], kn_values=[0.5, 0.25])
        assert np.isinf(table.conditions[0])
        assert table.overflow[0]


class TestDistinguishability:
    def test_zero_delta(self, rng):
        report = estimate_distinguishability(np.eye(4), np.ones(4), 0.0)
        assert report.kappa_hat == 0.0
        assert np.abs(report.worst_perturbation).max() == 0.0

    def test_identity_example(self):
        sigma = np.zeros(4)
        sigma[0] = 1.0
        report = estimate_distinguishability(np.eye(4), sigma, 0.1)
        assert report.kappa_hat == pytest.approx(0.1, rel=1e-12)

    def test_linearity_in_delta(self, rng):
        matrix = rng.standard_normal((8, 5))
        sigma = rng.standard_normal(5)
        one = estimate_distinguishability(matrix, sigma, 0.05)
        two = estimate_distinguishability(matrix, sigma, 0.10)
        assert two.kappa_hat == pytest.approx(2 * one.kappa_hat, rel=1e-12)

    def test_constraint_saturated(self, rng):
        matrix = rng.standard_normal((8, 5))
        report = estimate_distinguishability(matrix, rng.standard_normal(5), 0.2)
        assert np.linalg.norm(matrix @ report.worst_perturbation) <= 0.2 * (1 + 1e-10)

    def test_monte_carlo_oracle(self, rng):
        # directions scaled onto the constraint boundary sample the
        # reachable set; the analytic supremum must match within 2%
        for _ in range(3):
            matrix = rng.standard_normal((8, 5))
            sigma = rng.standard_normal(5)
            delta = 0.1
            report = estimate_distinguishability(matrix, sigma, delta)
            directions = rng.standard_normal((400000, 5))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
            reach = delta / np.linalg.norm(directions @ matrix.T, axis=1)
            kappa_mc = reach.max() / np.linalg.norm(sigma)
            assert abs(kappa_mc - report.kappa_hat) <= 0.02 * report.kappa_hat

    def test_json_record(self, tmp_path, rng):
        report = estimate_distinguishability(np.eye(3), np.ones(3), 0.5)
        path = tmp_path / "dist.json"
        distinguishability_to_json(report, path)
        payload = json.loads(path.read_text())
        assert set(payload) == {"delta", "kappa_hat", "smin", "norm_sigma"}


class TestGreensRank:
    def test_explicit_laplace_span(self):
        grid = make_uniform_grid(100)
        one = CoefficientField.constant(1.0, grid)
        zero = CoefficientField.constant(0.0, grid)
        report = greens_rank_check(one, zero, grid, mode="diffusion_products", n_pairs=40)
        assert report.rank == 3
        # rows must lie in span{(1-x)^2, x(1-x), x^2}
        basis = np.vstack([(1 - grid.nodes) ** 2, grid.nodes * (1 - grid.nodes), grid.nodes**2])
        pair = greens_functions(one, zero, grid)
        sample = (0.3 * pair.g1.values + 0.7 * pair.g2.values) * (0.5 * pair.g1.values + 0.5 * pair.g2.values)
        coeffs, *_ = np.linalg.lstsq(basis.T, sample, rcond=None)
        assert np.abs(basis.T @ coeffs - sample).max() <= 1e-10

    @pytest.mark.parametrize("preset", ["abs-test", "sca-subcritical"])
    def test_rank_three_for_presets(self, preset):
        grid = make_uniform_grid(150)
        sigma_s, sigma_a = get_preset(preset).fields(grid)
        report = greens_rank_check(sigma_s, sigma_a, grid, n_pairs=50, seed=11)
        assert report.rank == 3
        assert report.rank_le_3

    def test_gradient_mode_rank_bounded(self):
        grid = make_uniform_grid(150)
        sigma_s, sigma_a = get_preset("sca-subcritical").fields(grid)
        report = greens_rank_check(sigma_s, sigma_a, grid, mode="gradient_products", n_pairs=50)
        assert report.rank <= 3

    def test_single_pair_rank_one(self):
        grid = make_uniform_grid(80)
        sigma_s, sigma_a = get_preset("abs-test").fields(grid)
        report = greens_rank_check(sigma_s, sigma_a, grid,
                                   boundary_pairs=[(0.4, 0.6, 1.0, 0.0)])
        assert report.rank == 1


class TestTikhonov:
    def test_heavy_damping_kills_solution(self, rng):
        matrix = rng.standard_normal((8, 8))
        b = rng.standard_normal(8)
        s1 = np.linalg.svd(matrix, compute_uv=False)[0]
        x = tikhonov_reconstruct(matrix, b, 1e6 * s1**2)
        assert np.linalg.norm(x) <= 1e-5 * np.linalg.norm(matrix.T @ b) / s1**2

    def test_lambda_zero_equals_direct(self, rng):
        matrix = rng.standard_normal((6, 6)) + 6 * np.eye(6)
        b = rng.standard_normal(6)
        x = tikhonov_reconstruct(matrix, b, 0.0)
        assert np.abs(x - np.linalg.solve(matrix, b)).max() <= 1e-10

    def test_lambda_zero_singular_rejected(self):
        with pytest.raises(TransportError):
            tikhonov_reconstruct(np.zeros((4, 4)), np.ones(4), 0.0)

    def test_lipschitz_in_data(self, rng):
        matrix = rng.standard_normal((10, 7))
        b = rng.standard_normal(10)
        e = rng.standard_normal(10)
        lam = 0.3
        s = np.linalg.svd(matrix, compute_uv=False)
        bound = (s / (s**2 + lam)).max()
        x1 = tikhonov_reconstruct(matrix, b, lam)
        x2 = tikhonov_reconstruct(matrix, b + e, lam)
        assert np.linalg.norm(x1 - x2) <= bound * np.linalg.norm(e) * (1 + 1e-12)


class TestRowDiagnostics:
    def test_flatness_of_constant(self):
        grid = make_uniform_grid(10)
        assert flatness_check(CoefficientField.constant(2.0, grid)) == 0.0

    def test_flatness_zero_mean_rejected(self):
        grid = make_uniform_grid(10)
        values = np.tile([1.0, -1.0], 5)  # mean exactly zero
        with pytest.raises(TransportError):
            flatness_check(CoefficientField(values, grid))

    def test_ratio_requires_subcritical(self):
        grid = make_uniform_grid(30)
        gamma = CoefficientField(np.linspace(0, 1, 30), grid)
        rho = CoefficientField(np.linspace(1, 2, 30), grid)
        with pytest.raises(TransportError):
            ratio_check(gamma, rho, rho, CoefficientField.constant(1.0, grid),
                        CoefficientField.constant(0.0, grid), kn=0.1)

    def test_ratio_exact_for_manufactured_fields(self):
        # gamma built to satisfy the identity exactly: gamma = pred * (rho_f rho_g)
        grid = make_uniform_grid(200)
        x = grid.nodes
        sigma_s = CoefficientField.constant(4.0, grid)
        sigma_a = CoefficientField.constant(1.0, grid)
        kn = 0.125
        pred = kn / (kn**2 + 4.0)
        rho_f = CoefficientField(2.0 + np.sin(np.pi * x), grid)
        rho_g = CoefficientField(1.5 + np.cos(np.pi * x), grid)
        gamma = CoefficientField(pred * rho_f.values * rho_g.values, grid)
        report = ratio_check(gamma, rho_f, rho_g, sigma_s, sigma_a, kn, margin=0.05)
        assert report.worst_relative_error <= 1e-11
        assert report.median_ratio == pytest.approx(pred, rel=1e-11)

    def test_ratio_independent_of_delta_normalization(self):
        # a source rescaling multiplies gamma and rho_f by the same factor,
        # so the derivative ratio is unchanged
        from rteinv import BoundaryData, gamma_scattering, solve_adjoint, solve_forward

        problem = preset_problem("sca-subcritical", 401, 8, kn=0.25)
        quad = problem.quad
        detector = BoundaryData.isotropic(quad, 1.0, 0.0)
        g = solve_adjoint(problem, detector, mode="continuous", method="direct")
        rho_g = CoefficientField(g.values @ quad.weights, problem.grid)
        reports = []
        for normalized in (True, False):
            source = BoundaryData.velocity_delta(quad, 7, normalized=normalized)
            f0 = solve_forward(problem, source, method="direct")
            gamma = gamma_scattering(f0, g, 0.25)
            rho_f = CoefficientField(f0.values @ quad.weights, problem.grid)
            reports.append(ratio_check(gamma, rho_f, rho_g, problem.sigma_s, problem.sigma_a,
                                       0.25, margin=0.06, derivative_floor=1e-2))
        a, b = reports
        assert np.allclose(a.ratio[a.mask], b.ratio[b.mask], rtol=1e-9)

    def test_exports(self, tmp_path):
        problem = preset_problem("abs-test", 12, 8, kn=0.5)
        plan = SourceDetectorPlan.paper_plan(problem.quad)
        kernel = assemble_kernel_matrix(problem, plan, ProblemKind.ABSORPTION, method="direct")
        report = svd_report(kernel)
        svd_to_csv(report, tmp_path / "svd.csv")
        vectors_to_csv(report, tmp_path / "vec.csv")
        svd_lines = (tmp_path / "svd.csv").read_text().strip().splitlines()
        assert svd_lines[0] == "index,singular_value"
        assert len(svd_lines) == 1 + len(report.singular_values)
        vec_lines = (tmp_path / "vec.csv").read_text().strip().splitlines()
        assert vec_lines[0] == "x,v1,v2,v3"
        assert len(vec_lines) == 1 + 12
