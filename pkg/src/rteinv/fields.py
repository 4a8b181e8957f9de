"""Scalar fields sampled on a spatial grid (cross sections, densities, kernels)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import SpatialGrid

__all__ = ["FieldError", "CoefficientField", "angular_average"]


class FieldError(ValueError):
    """Invalid coefficient field."""


@dataclass(frozen=True)
class CoefficientField:
    """One real value per spatial node."""

    values: np.ndarray
    grid: SpatialGrid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.n_x,):
            raise FieldError(
                f"field length {values.shape} does not match grid ({self.grid.n_x},)"
            )
        if not np.all(np.isfinite(values)):
            raise FieldError("field values must be finite")

    @classmethod
    def constant(cls, value: float, grid: SpatialGrid) -> "CoefficientField":
        return cls(np.full(grid.n_x, float(value)), grid)

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], grid: SpatialGrid) -> "CoefficientField":
        return cls(np.broadcast_to(np.asarray(fn(grid.nodes), dtype=float), (grid.n_x,)).copy(), grid)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def require_nonnegative(self, name: str = "field") -> "CoefficientField":
        if np.any(self.values < 0):
            raise FieldError(f"{name} must be nonnegative")
        return self

    def require_positive(self, name: str = "field") -> "CoefficientField":
        if np.any(self.values <= 0):
            raise FieldError(f"{name} must be strictly positive")
        return self


def angular_average(solution) -> CoefficientField:
    """<f>(x_i) = sum_j omega_j f(x_i, v_j) of a transport solution."""
    values = solution.problem.quad.average(solution.values)
    return CoefficientField(values, solution.problem.grid)
