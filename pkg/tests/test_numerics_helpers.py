import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowup_lab import series
from blowup_lab._panels import PanelGrid


def test_series_mul_and_reciprocal():
    a = np.array([1.0, 2.0, -0.5, 0.25])
    inv = series.reciprocal(a, 8)
    prod = series.mul(a, inv, 8)
    assert np.allclose(prod, [1, 0, 0, 0, 0, 0, 0, 0], atol=1e-14)


def test_series_power_matches_binomial():
    # (1 + x)^(1/2)
    c = series.power(np.array([1.0, 1.0]), 0.5, 6)
    expect = [1, 0.5, -0.125, 0.0625, -0.0390625, 0.02734375]
    assert np.allclose(c, expect, atol=1e-15)


def test_series_compose_exp_of_sin_like():
    # outer = 1 + y + y^2/2, inner = x: identity composition
    out = series.compose(np.array([1.0, 1.0, 0.5]), np.array([0.0, 1.0]), 4)
    assert np.allclose(out, [1, 1, 0.5, 0], atol=1e-15)


def test_scaling_ode_sphere():
    # x y' = y G(y^2) with G from sin: y = 2 arctan(c x)
    from blowup_lab.surface import sphere_series_coeffs
    c = 0.3
    coeffs = series.solve_scaling_ode(sphere_series_coeffs(20), 2 * c, 12)
    x = 0.7
    val = sum(coeffs[k] * x ** (2 * k + 1) for k in range(12))
    assert val == pytest.approx(2 * math.atan(c * x), rel=1e-10)


def test_panel_cumulative_and_derivative():
    g = PanelGrid.uniform(0.0, 2.0, 0.5, 16)
    x = g.nodes
    integral = g.cumulative(np.cos(x))
    assert np.allclose(integral, np.sin(x), atol=1e-13)
    assert np.allclose(g.derivative(np.sin(x)), np.cos(x), atol=1e-11)
    tab = g.table(np.exp(x))
    pts = np.linspace(0, 2, 37)
    assert np.allclose(g.evaluate(tab, pts), np.exp(pts), rtol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 2.0))
def test_panel_interpolation_anywhere(t):
    g = PanelGrid.uniform(0.0, 2.0, 0.25, 12)
    tab = g.table(np.sin(3 * g.nodes))
    assert float(g.evaluate(tab, np.array([t]))[0]) == pytest.approx(math.sin(3 * t), abs=1e-11)
