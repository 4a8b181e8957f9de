"""Named coefficient functions and a small expression language for the CLI.

Expressions support +, -, *, /, unary minus, sin, cos, parentheses, the
variable x and the constant pi; enough to state every built-in preset
inline.
"""

from __future__ import annotations

import ast
import operator
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fields import CoefficientField
from .mesh import SpatialGrid

__all__ = ["PresetError", "CoefficientPreset", "COEFFICIENT_PRESETS", "get_preset", "parse_expression"]


class PresetError(ValueError):
    """Unknown preset or malformed coefficient expression."""


@dataclass(frozen=True)
class CoefficientPreset:
    name: str
    sigma_s: Callable[[np.ndarray], np.ndarray]
    sigma_a: Callable[[np.ndarray], np.ndarray]
    sigma_s_text: str
    sigma_a_text: str

    def fields(self, grid: SpatialGrid):
        return (
            CoefficientField.from_callable(self.sigma_s, grid),
            CoefficientField.from_callable(self.sigma_a, grid),
        )


def _base_s(x):
    return 1.0 + 1.0 / (1.5 + np.sin(2 * np.pi * x))


def _base_a(x):
    return 4.0 + 0.5 * np.sin(4 * np.pi * x)


COEFFICIENT_PRESETS = {
    "abs-test": CoefficientPreset(
        "abs-test",
        _base_s,
        _base_a,
        "1 + 1/(1.5 + sin(2*pi*x))",
        "4 + 0.5*sin(4*pi*x)",
    ),
    "sca-critical": CoefficientPreset(
        "sca-critical",
        _base_s,
        lambda x: np.zeros_like(x),
        "1 + 1/(1.5 + sin(2*pi*x))",
        "0",
    ),
    "sca-subcritical": CoefficientPreset(
        "sca-subcritical",
        lambda x: 16.0 * _base_s(x),
        lambda x: _base_a(x) / 16.0,
        "16*(1 + 1/(1.5 + sin(2*pi*x)))",
        "(4 + 0.5*sin(4*pi*x))/16",
    ),
}


def get_preset(name: str) -> CoefficientPreset:
    try:
        return COEFFICIENT_PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(COEFFICIENT_PRESETS))
        raise PresetError(f"unknown preset {name!r} (known: {known})") from None


_BINARY_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
}
_UNARY_OPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCTIONS = {"sin": np.sin, "cos": np.cos}
_NAMES = {"pi": np.pi}


def parse_expression(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a coefficient expression in x into a vectorized callable."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise PresetError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def evaluate(node, x):
        if isinstance(node, ast.Expression):
            return evaluate(node.body, x)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)):
                return float(node.value)
            raise PresetError(f"non-numeric constant in {text!r}")
        if isinstance(node, ast.Name):
            if node.id == "x":
                return x
            if node.id in _NAMES:
                return _NAMES[node.id]
            raise PresetError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINARY_OPS:
            return _BINARY_OPS[type(node.op)](evaluate(node.left, x), evaluate(node.right, x))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY_OPS:
            return _UNARY_OPS[type(node.op)](evaluate(node.operand, x))
        if isinstance(node, ast.Call):
            if isinstance(node.func, ast.Name) and node.func.id in _FUNCTIONS and not node.keywords:
                if len(node.args) != 1:
                    raise PresetError(f"{node.func.id} takes one argument")
                return _FUNCTIONS[node.func.id](evaluate(node.args[0], x))
            raise PresetError(f"unsupported call in {text!r}")
        raise PresetError(f"unsupported syntax in {text!r}")

    def fn(x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(evaluate(tree, np.asarray(x, dtype=float)), dtype=float), np.shape(x)).copy()

    fn.expression = text
    return fn
