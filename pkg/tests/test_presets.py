import numpy as np
import pytest

from rteinv import PresetError, get_preset, make_uniform_grid, parse_expression


class TestPresets:
    def test_abs_test_values_at_zero(self):
        grid = make_uniform_grid(5)
        sigma_s, sigma_a = get_preset("abs-test").fields(grid)
        assert sigma_s.values[0] == pytest.approx(1 + 1 / 1.5)
        assert sigma_a.values[0] == pytest.approx(4.0)

    def test_critical_has_no_absorption(self):
        grid = make_uniform_grid(5)
        _, sigma_a = get_preset("sca-critical").fields(grid)
        assert np.all(sigma_a.values == 0.0)

    def test_subcritical_scaling(self):
        grid = make_uniform_grid(5)
        sigma_s, sigma_a = get_preset("sca-subcritical").fields(grid)
        assert sigma_a.values[0] == pytest.approx(0.25)
        assert sigma_s.values[0] == pytest.approx(16 * (1 + 1 / 1.5))

    def test_unknown_preset(self):
        with pytest.raises(PresetError):
            get_preset("nope")

    def test_preset_text_matches_parser(self):
        grid = make_uniform_grid(33)
        for name in ("abs-test", "sca-critical", "sca-subcritical"):
            preset = get_preset(name)
            assert np.allclose(parse_expression(preset.sigma_s_text)(grid.nodes),
                               preset.sigma_s(grid.nodes))
            assert np.allclose(parse_expression(preset.sigma_a_text)(grid.nodes),
                               preset.sigma_a(grid.nodes))


class TestExpressions:
    @pytest.mark.parametrize("text,point,expected", [
        ("1", 0.3, 1.0),
        ("x", 0.3, 0.3),
        ("2*x - 1", 0.25, -0.5),
        ("sin(pi*x)", 0.5, 1.0),
        ("cos(2*pi*x)/(1.5 + sin(2*pi*x))", 0.0, 1 / 1.5),
        ("-x + 4", 1.0, 3.0),
    ])
    def test_values(self, text, point, expected):
        fn = parse_expression(text)
        assert fn(np.array([point]))[0] == pytest.approx(expected)

    def test_vectorized(self):
        fn = parse_expression("4 + 0.5*sin(4*pi*x)")
        x = np.linspace(0, 1, 7)
        assert np.allclose(fn(x), 4 + 0.5 * np.sin(4 * np.pi * x))

    @pytest.mark.parametrize("bad", [
        "import os",
        "x**2",
        "exp(x)",
        "__builtins__",
        "lambda v: v",
        "y + 1",
        "sin(x, 2)",
    ])
    def test_rejects_unsupported(self, bad):
        with pytest.raises(PresetError):
            parse_expression(bad)(np.array([0.5]))
