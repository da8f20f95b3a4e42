import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowup_lab.errors import InvalidProfileError
from blowup_lab.surface import (make_from_series, make_sphere, perturbed_sphere_coeffs,
                                sphere_series_coeffs, validate)


def test_sphere_values(sphere):
    assert sphere.g(math.pi / 2) == pytest.approx(1.0, abs=1e-15)
    assert sphere.f(math.pi / 4) == pytest.approx(0.5, abs=1e-15)
    assert sphere.g1(math.pi) == pytest.approx(-1.0, abs=1e-15)
    assert sphere.rho_M == math.pi


def test_series_of_sine_finds_pi():
    p = make_from_series(sphere_series_coeffs(), 3.0)
    assert abs(p.rho_M - math.pi) <= 1e-10


def test_linear_profile_has_no_pole():
    with pytest.raises(InvalidProfileError, match="rho_M not bracketed"):
        make_from_series([1.0], 3.0)


def test_leading_coefficient_must_be_one():
    with pytest.raises(InvalidProfileError):
        make_from_series([2.0, -1 / 6], 3.0)


def test_sphere_validates():
    rep = validate(make_sphere(), 1000)
    assert rep.ok and not rep.failures()
    row = {e.assumption: e for e in rep.entries}
    assert abs(row["g'(0)=1"].worst_value) <= 1e-12


def test_cosh_like_profile_fails_slope_bound():
    # G = 1 + x/6 + ... makes g' > 1 right away; the last term supplies a pole
    coeffs = [1.0, 1 / 6, 1 / 120, -1e-3]
    p = make_from_series(coeffs, 3.0)
    rep = validate(p, 200)
    failed = {e.assumption for e in rep.failures()}
    assert "|g'|<1 on (0,rho_M)" in failed


def test_validate_needs_sixteen_samples(sphere):
    with pytest.raises(InvalidProfileError):
        validate(sphere, 15)


def test_perturbed_sphere_is_admissible(bumpy):
    rep = validate(bumpy, 500)
    assert rep.ok, rep.failures()
    x = np.linspace(0.1, 3.0, 7)
    g = np.sin(x) * (1 + 0.05 * np.sin(x) ** 2)
    assert np.max(np.abs(bumpy.g(x) - g)) < 1e-12
    assert abs(bumpy.rho_M - math.pi) < 1e-10


@pytest.mark.parametrize("which", ["sphere", "bumpy"])
def test_f_equals_g_gprime(which, sphere, bumpy):
    p = sphere if which == "sphere" else bumpy
    rho = np.linspace(0, p.rho_M, 1001)
    assert np.max(np.abs(p.f(rho) - p.g(rho) * p.g1(rho))) <= 1e-12


@pytest.mark.parametrize("which", ["sphere", "bumpy"])
def test_reflection_limit_at_far_pole(which, sphere, bumpy):
    p = sphere if which == "sphere" else bumpy
    d = np.array([1e-2, 1e-3, 1e-4])
    q = p.f(p.rho_M - d) / d
    # f(rho_M - d)/d = -1 + c d^2 + ..., Richardson in d^2
    r1 = (100 * q[1] - q[0]) / 99
    r2 = (100 * q[2] - q[1]) / 99
    assert abs(r2 + 1) < 1e-8 and abs(r1 + 1) < 1e-6


@pytest.mark.parametrize("which", ["sphere", "bumpy"])
def test_top_evaluators_match_direct(which, sphere, bumpy):
    p = sphere if which == "sphere" else bumpy
    d = np.linspace(0.05, 1.5, 9)
    for k in range(4):
        assert np.allclose(p.dg_top(d, k), p.dg(p.rho_M - d, k), atol=1e-11)
    assert np.allclose(p.one_minus_f1_top(d), 1 - p.f1(p.rho_M - d), atol=1e-11)


def test_G_and_F_factorizations(bumpy):
    rho = np.linspace(0.01, 3.0, 50)
    assert np.allclose(rho * bumpy.G(rho ** 2), bumpy.g(rho), rtol=1e-13, atol=1e-14)
    assert np.allclose(rho * bumpy.F(rho ** 2), bumpy.f(rho), rtol=1e-12, atol=1e-14)


def test_energy_of_harmonic_map(sphere, bumpy):
    assert sphere.energy_of_harmonic_map() == pytest.approx(2.0, rel=1e-15)
    # int_0^pi sin(1 + eps sin^2) = 2 + eps * 4/3
    assert bumpy.energy_of_harmonic_map() == pytest.approx(2 + 0.05 * 4 / 3, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.15))
def test_perturbed_family_is_admissible(eps):
    p = make_from_series(perturbed_sphere_coeffs(eps), 3.0)
    assert validate(p, 64).ok
    assert abs(p.rho_M - math.pi) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(-10.0, 10.0))
def test_sphere_oddness(rho):
    p = make_sphere()
    assert p.g(-rho) == pytest.approx(-p.g(rho), abs=1e-15)
    assert p.g(math.pi + rho) == pytest.approx(-p.g(math.pi - rho), abs=1e-14)
