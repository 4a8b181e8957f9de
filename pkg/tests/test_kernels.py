import numpy as np
import pytest

from rteinv import (
    BoundaryData,
    CoefficientField,
    ProblemKind,
    SourceDetectorPlan,
    TransportError,
    TransportSolution,
    assemble_kernel_matrix,
    duality_residual,
    gamma_absorption,
    gamma_scattering,
    make_gauss_quadrature,
    solve_adjoint,
    solve_forward,
    synthesize_data,
)
from rteinv.kernels import data_to_csv, kernel_to_csv

from conftest import constant_problem, preset_problem


def manual_solution(problem, fn):
    values = np.broadcast_to(fn(problem.quad.ordinates), (problem.grid.n_x, problem.quad.n_v)).copy()
    return TransportSolution(values, problem)


class TestGamma:
    def test_absorption_constants(self):
        problem = constant_problem(10, 8, kn=0.25)
        ones = manual_solution(problem, np.ones_like)
        gamma = gamma_absorption(ones, ones, 0.25)
        assert np.allclose(gamma.values, 0.25, atol=1e-14)

    def test_absorption_linear_in_v(self):
        problem = constant_problem(10, 16, kn=0.5)
        lin = manual_solution(problem, lambda v: v)
        gamma = gamma_absorption(lin, lin, 0.5)
        assert np.allclose(gamma.values, 0.5 / 3, atol=1e-10)

    def test_absorption_nonnegative_for_paper_setup(self):
        problem = preset_problem("abs-test", 30, 8, kn=0.25)
        f0 = solve_forward(problem, BoundaryData.velocity_delta(problem.quad, 5), method="direct")
        g = solve_adjoint(problem, BoundaryData.isotropic(problem.quad, 0.0, 1.0), method="direct")
        gamma = gamma_absorption(f0, g, 0.25)
        assert gamma.values.min() >= -1e-12

    def test_scattering_annihilates_constants(self):
        problem = constant_problem(10, 8, kn=0.25)
        ones = manual_solution(problem, np.ones_like)
        anything = manual_solution(problem, lambda v: 1 + v + v**2)
        gamma = gamma_scattering(ones, anything, 0.25)
        assert np.abs(gamma.values).max() <= 1e-13

    def test_scattering_linear_in_v(self):
        problem = constant_problem(10, 16, kn=0.5)
        lin = manual_solution(problem, lambda v: v)
        gamma = gamma_scattering(lin, lin, 0.5)
        assert np.allclose(gamma.values, -1.0 / (3 * 0.5), atol=1e-10)

    def test_grid_mismatch_rejected(self):
        a = constant_problem(10, 8, kn=0.5)
        b = constant_problem(12, 8, kn=0.5)
        with pytest.raises(TransportError):
            gamma_absorption(manual_solution(a, np.ones_like), manual_solution(b, np.ones_like), 0.5)

    def test_critical_flatness_improves_with_resolution(self):
        def worst_flatness(n_x):
            problem = preset_problem("sca-critical", n_x, 8, kn=1.0)
            f0 = solve_forward(problem, BoundaryData.velocity_delta(problem.quad, 7), method="direct")
            g = solve_adjoint(problem, BoundaryData.isotropic(problem.quad, 0.0, 1.0), method="direct")
            gamma = gamma_scattering(f0, g, 1.0).values
            return np.abs(gamma - gamma.mean()).max() / abs(gamma.mean())

        coarse, fine = worst_flatness(100), worst_flatness(199)
        assert fine <= coarse / 1.5


class TestPlan:
    def test_paper_plan_counts(self):
        quad = make_gauss_quadrature(80)
        plan = SourceDetectorPlan.paper_plan(quad)
        assert plan.n_sources == 80
        assert plan.n_detectors == 2
        assert plan.n_pairs == 160

    def test_velocity_delta_normalization(self):
        quad = make_gauss_quadrature(8)
        delta = BoundaryData.velocity_delta(quad, 5, normalized=True)
        assert np.sum(quad.weights * delta.left) == pytest.approx(1.0)
        plain = BoundaryData.velocity_delta(quad, 5, normalized=False)
        assert plain.left.max() == 1.0

    def test_plain_plan_sup_norm_bound(self):
        quad = make_gauss_quadrature(8)
        plan = SourceDetectorPlan.paper_plan(quad, normalized=False)
        for source in plan.sources:
            assert max(source.left.max(), source.right.max()) <= 1.0

    def test_pair_indexing_roundtrip(self):
        quad = make_gauss_quadrature(8)
        plan = SourceDetectorPlan.paper_plan(quad)
        for p in (0, 5, 9, 15):
            k, d = plan.pair(p)
            assert plan.pair_index(k, d) == p


class TestAssembly:
    def test_paper_sizes(self):
        problem = preset_problem("abs-test", 200, 80, kn=0.25)
        plan = SourceDetectorPlan.paper_plan(problem.quad)
        kernel = assemble_kernel_matrix(problem, plan, ProblemKind.ABSORPTION, method="direct")
        assert kernel.shape == (160, 200)

    def test_single_pair_matches_pointwise_gamma(self):
        problem = preset_problem("abs-test", 10, 8, kn=0.5)
        quad = problem.quad
        source = BoundaryData.velocity_delta(quad, 6)
        plan = SourceDetectorPlan((source,), ("right",))
        kernel = assemble_kernel_matrix(problem, plan, ProblemKind.ABSORPTION,
                                        include_weights=False, method="direct")
        f0 = solve_forward(problem, source, method="direct")
        g = solve_adjoint(problem, BoundaryData.isotropic(quad, 0.0, 1.0), method="direct")
        gamma = gamma_absorption(f0, g, 0.5)
        assert np.allclose(kernel.entries[0], gamma.values, rtol=1e-12, atol=1e-14)

    def test_swapping_sources_permutes_rows(self):
        problem = preset_problem("abs-test", 12, 8, kn=0.5)
        quad = problem.quad
        s0 = BoundaryData.velocity_delta(quad, 5)
        s1 = BoundaryData.velocity_delta(quad, 6)
        a = assemble_kernel_matrix(problem, SourceDetectorPlan((s0, s1), ("left", "right")),
                                   ProblemKind.ABSORPTION, method="direct")
        b = assemble_kernel_matrix(problem, SourceDetectorPlan((s1, s0), ("left", "right")),
                                   ProblemKind.ABSORPTION, method="direct")
        assert np.array_equal(a.entries[0], b.entries[1])
        assert np.array_equal(a.entries[1], b.entries[0])
        assert np.array_equal(a.entries[2], b.entries[3])

    def test_weights_flag(self):
        problem = preset_problem("abs-test", 10, 8, kn=0.5)
        plan = SourceDetectorPlan((BoundaryData.velocity_delta(problem.quad, 6),), ("right",))
        with_w = assemble_kernel_matrix(problem, plan, ProblemKind.ABSORPTION, include_weights=True,
                                        method="direct")
        without = assemble_kernel_matrix(problem, plan, ProblemKind.ABSORPTION, include_weights=False,
                                         method="direct")
        assert np.allclose(with_w.entries, without.entries * problem.grid.weights)

    def test_critical_requires_zero_absorption(self):
        problem = preset_problem("abs-test", 10, 8, kn=0.5)
        plan = SourceDetectorPlan.paper_plan(problem.quad)
        with pytest.raises(TransportError):
            assemble_kernel_matrix(problem, plan, ProblemKind.SCATTERING_CRITICAL, method="direct")

    def test_row_linearity_in_source(self):
        problem = preset_problem("abs-test", 12, 8, kn=0.5)
        quad = problem.quad
        base = BoundaryData.velocity_delta(quad, 6)
        scaled = BoundaryData(2.0 * base.left, 2.0 * base.right)
        a = assemble_kernel_matrix(problem, SourceDetectorPlan((base,), ("right",)),
                                   ProblemKind.ABSORPTION, method="direct")
        b = assemble_kernel_matrix(problem, SourceDetectorPlan((scaled,), ("right",)),
                                   ProblemKind.ABSORPTION, method="direct")
        assert np.allclose(b.entries, 2.0 * a.entries, rtol=1e-12)


class TestSynthesizeData:
    def test_zero_perturbation(self):
        problem = preset_problem("abs-test", 15, 8, kn=0.5)
        plan = SourceDetectorPlan.paper_plan(problem.quad)
        zero = CoefficientField.constant(0.0, problem.grid)
        for mode in ("nonlinear", "linearized"):
            data = synthesize_data(problem, zero, plan, ProblemKind.ABSORPTION, mode=mode,
                                   method="direct")
            assert np.abs(data.values).max() <= 1e-14

    def test_linearization_gap_is_quadratic(self):
        problem = preset_problem("abs-test", 20, 8, kn=0.5)
        quad = problem.quad
        plan = SourceDetectorPlan((BoundaryData.velocity_delta(quad, 6),), ("right",))
        gaps = []
        for amplitude in (0.2, 0.1, 0.05):
            tilde = CoefficientField.from_callable(
                lambda x: amplitude * np.sin(np.pi * x), problem.grid
            )
            nonlinear = synthesize_data(problem, tilde, plan, ProblemKind.ABSORPTION,
                                        mode="nonlinear", method="direct")
            linearized = synthesize_data(problem, tilde, plan, ProblemKind.ABSORPTION,
                                         mode="linearized", method="direct")
            gaps.append(abs(nonlinear.values[0] - linearized.values[0]))
        assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.25)
        assert gaps[1] / gaps[2] == pytest.approx(4.0, rel=0.25)

    def test_added_absorption_reduces_outflow(self):
        # with the background-minus-perturbed convention the residuals are
        # nonnegative for a nonnegative absorption bump
        problem = preset_problem("abs-test", 20, 8, kn=0.5)
        plan = SourceDetectorPlan.paper_plan(problem.quad)
        tilde = CoefficientField.from_callable(lambda x: 0.2 * np.sin(np.pi * x), problem.grid)
        data = synthesize_data(problem, tilde, plan, ProblemKind.ABSORPTION, mode="nonlinear",
                               method="direct")
        assert data.values.min() >= -1e-14


class TestDuality:
    def test_zero_perturbation_uses_floor(self):
        problem = preset_problem("abs-test", 15, 8, kn=0.5)
        plan = SourceDetectorPlan.paper_plan(problem.quad)
        zero = CoefficientField.constant(0.0, problem.grid)
        assert duality_residual(problem, plan, (0, 0), zero, ProblemKind.ABSORPTION,
                                method="direct") == 0.0

    @pytest.mark.parametrize("kind,preset", [
        (ProblemKind.ABSORPTION, "abs-test"),
        (ProblemKind.SCATTERING_SUBCRITICAL, "sca-subcritical"),
    ])
    def test_algebraic_duality_exact(self, kind, preset):
        problem = preset_problem(preset, 40, 8, kn=0.25)
        plan = SourceDetectorPlan.paper_plan(problem.quad)
        tilde = CoefficientField.from_callable(lambda x: 0.1 * np.sin(np.pi * x), problem.grid)
        residual = duality_residual(problem, plan, (1, 3), tilde, kind,
                                    adjoint_mode="algebraic", method="direct")
        assert residual <= 1e-8

    def test_continuous_duality_first_order(self):
        def residual(n_x):
            problem = preset_problem("abs-test", n_x, 8, kn=0.25)
            plan = SourceDetectorPlan.paper_plan(problem.quad)
            tilde = CoefficientField.from_callable(lambda x: 0.1 * np.sin(np.pi * x), problem.grid)
            return duality_residual(problem, plan, (1, 5), tilde, ProblemKind.ABSORPTION,
                                    adjoint_mode="continuous", method="direct")

        r_coarse, r_fine = residual(50), residual(99)
        assert r_fine <= r_coarse / 1.5


class TestExports:
    def test_kernel_csv_layout(self, tmp_path):
        problem = preset_problem("abs-test", 10, 8, kn=0.5)
        plan = SourceDetectorPlan.paper_plan(problem.quad)
        kernel = assemble_kernel_matrix(problem, plan, ProblemKind.ABSORPTION, method="direct")
        path = tmp_path / "kernel.csv"
        kernel_to_csv(kernel, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("i,,0,1,")
        assert lines[1].startswith("x_i,,0,")
        assert lines[2].startswith("w_i,,")
        assert lines[3].startswith("k,d,A_1,")
        assert len(lines) == 4 + 16
        first = lines[4].split(",")
        assert first[:2] == ["1", "1"]
        assert len(first) == 2 + 10

    def test_data_csv(self, tmp_path):
        problem = preset_problem("abs-test", 10, 8, kn=0.5)
        plan = SourceDetectorPlan.paper_plan(problem.quad)
        tilde = CoefficientField.from_callable(lambda x: 0.1 * np.sin(np.pi * x), problem.grid)
        data = synthesize_data(problem, tilde, plan, ProblemKind.ABSORPTION, method="direct")
        path = tmp_path / "data.csv"
        data_to_csv(data, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "k,d,b"
        assert len(lines) == 1 + 16
