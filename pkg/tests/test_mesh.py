import numpy as np
import pytest

from rteinv import (
    GridError,
    make_double_gauss_quadrature,
    make_gauss_quadrature,
    make_uniform_grid,
)


class TestUniformGrid:
    def test_three_nodes(self):
        grid = make_uniform_grid(3)
        assert np.allclose(grid.nodes, [0.0, 0.5, 1.0])
        assert np.allclose(grid.weights, [0.25, 0.5, 0.25])

    def test_paper_spacing(self):
        grid = make_uniform_grid(200)
        assert grid.dx == pytest.approx(1.0 / 199)
        assert grid.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_quadratic_integration(self):
        # oracle: integral of x^2 over [0,1] is 1/3 exactly
        grid = make_uniform_grid(21)
        assert abs(np.sum(grid.weights * grid.nodes**2) - 1.0 / 3.0) <= 1e-3

    def test_linear_exactness(self):
        grid = make_uniform_grid(17)
        p = 3.0 * grid.nodes - 0.7
        assert np.sum(grid.weights * p) == pytest.approx(3.0 / 2.0 - 0.7, abs=1e-14)

    @pytest.mark.parametrize("n", [0, 1, 2])
    def test_too_small(self, n):
        with pytest.raises(GridError):
            make_uniform_grid(n)


class TestGaussQuadrature:
    def test_two_point(self):
        quad = make_gauss_quadrature(2)
        assert np.allclose(sorted(np.abs(quad.ordinates)), [1 / np.sqrt(3)] * 2)
        assert np.allclose(quad.weights, [0.5, 0.5])

    def test_fourth_moment(self):
        quad = make_gauss_quadrature(80)
        assert np.sum(quad.weights * quad.ordinates**4) == pytest.approx(0.2, abs=1e-10)

    @pytest.mark.parametrize("n", [2, 8, 80])
    def test_first_moment_vanishes(self, n):
        quad = make_gauss_quadrature(n)
        assert abs(np.sum(quad.weights * quad.ordinates)) <= 1e-14

    def test_second_moment(self):
        quad = make_gauss_quadrature(8)
        assert np.sum(quad.weights * quad.ordinates**2) == pytest.approx(1 / 3, abs=1e-6)

    @pytest.mark.parametrize("n", [4, 10, 32])
    def test_polynomial_exactness(self, n):
        # exact up to degree 2n-1 with the normalized measure
        quad = make_gauss_quadrature(n)
        for degree in range(0, 2 * n, 2):
            value = np.sum(quad.weights * quad.ordinates**degree)
            exact = 1.0 / (degree + 1)
            assert abs(value - exact) <= 1e-12 * max(1.0, abs(exact))

    @pytest.mark.parametrize("n", [1, 3, 7])
    def test_odd_counts_rejected(self, n):
        with pytest.raises(GridError):
            make_gauss_quadrature(n)

    def test_no_zero_ordinate(self):
        quad = make_gauss_quadrature(40)
        assert np.all(quad.ordinates != 0.0)


class TestDoubleGauss:
    def test_half_range_first_moment_exact(self):
        quad = make_double_gauss_quadrature(8)
        pos = quad.positive
        assert np.sum(quad.weights[pos] * quad.ordinates[pos]) == pytest.approx(0.25, abs=1e-14)

    def test_normalization_and_symmetry(self):
        quad = make_double_gauss_quadrature(12)
        assert quad.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert abs(np.sum(quad.weights * quad.ordinates)) <= 1e-14
