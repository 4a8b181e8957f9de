import numpy as np
import pytest

from rteinv import (
    CoefficientField,
    TransportProblem,
    get_preset,
    make_gauss_quadrature,
    make_uniform_grid,
)


def preset_problem(name: str, n_x: int, n_v: int, kn: float) -> TransportProblem:
    grid = make_uniform_grid(n_x)
    quad = make_gauss_quadrature(n_v)
    sigma_s, sigma_a = get_preset(name).fields(grid)
    return TransportProblem(grid, quad, sigma_s, sigma_a, kn=kn)


def constant_problem(n_x: int, n_v: int, kn: float, sigma_s=1.0, sigma_a=0.0) -> TransportProblem:
    grid = make_uniform_grid(n_x)
    quad = make_gauss_quadrature(n_v)
    return TransportProblem(
        grid,
        quad,
        CoefficientField.constant(sigma_s, grid),
        CoefficientField.constant(sigma_a, grid),
        kn=kn,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
