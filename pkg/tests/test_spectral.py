import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import hankel1, jv, yv

from blowup_lab.spectral import FundamentalSystem, Potential
from blowup_lab.spectral.eigenfunctions import (PhiSeries, first_iterate_lower_constant,
                                                fit_volterra_bound)
from blowup_lab.spectral.measure import build_spectral_data, compute_phi, compute_psi_plus
from blowup_lab.spectral.symbols import PsiSymbols
from blowup_lab.spectral.transform import low_tail, small_xi_law

from conftest import TAN_HALF


def sphere_phi0(R):
    R = np.asarray(R, dtype=float)
    return 2 * TAN_HALF * R ** 1.5 / (1 + (TAN_HALF * R) ** 2)


def bessel_phi(r, xi):
    return 2 / math.sqrt(xi) * np.sqrt(r) * jv(1, r * math.sqrt(xi))


def bessel_amplitude(r, xi):
    # local size of the oscillation, so that zeros of J1 do not spoil a relative check
    x = r * math.sqrt(xi)
    env = np.where(x < 1, np.abs(jv(1, x)), np.hypot(jv(1, x), yv(1, x)))
    return 2 / math.sqrt(xi) * np.sqrt(r) * env


@pytest.fixture(scope="module")
def fs_bumpy(hm_bumpy):
    return FundamentalSystem(Potential(hm_bumpy))


@pytest.fixture(scope="module")
def series(fs):
    return PhiSeries(fs)


@pytest.fixture(scope="module")
def sdata(pot):
    return build_spectral_data(pot, np.geomspace(1e-6, 1e3, 91))


@pytest.fixture(scope="module")
def sdata_free(pot_free):
    return build_spectral_data(pot_free, np.geomspace(0.1, 100, 25))


# potential

def test_potential_regular_and_decaying(pot):
    # sphere: f'''(0) = -4 and Q ~ 2 tan(1/2) R
    assert float(pot.V(0.0)) == pytest.approx(-8 * TAN_HALF ** 2, rel=1e-12)
    assert float(pot.V(1e-5)) == pytest.approx(float(pot.V(0.0)), rel=1e-8)
    assert float(pot.W(0.0)) == pytest.approx(-2 * float(pot.V(0.0)), rel=1e-12)
    R = np.geomspace(10, 1e5, 50)
    v = np.abs(pot.V(R)) * R ** 4
    assert np.max(v) < 100


def test_free_potential_vanishes(pot_free):
    R = np.geomspace(1e-3, 1e3, 20)
    assert np.all(pot_free.V(R) == 0) and np.all(pot_free.W(R) == 0)
    assert np.allclose(pot_free.p(R), 0.75)


def test_commutator_potential_against_derivative(pot):
    R = np.geomspace(1e-2, 1e2, 60)
    h = 1e-5 * R
    dV = (pot.V(R + h) - pot.V(R - h)) / (2 * h)
    assert np.allclose(pot.dV(R), dV, rtol=1e-6, atol=1e-9)
    assert np.allclose(pot.W(R), -(2 * pot.V(R) + R * dV), rtol=1e-6, atol=1e-9)


def test_commutator_identity_by_differences(pot):
    # [L, R d/dR] u = (2L + W) u for a smooth test function, all derivatives by differences
    h = 1e-3
    def d1(fun, R):
        return (fun(R - 2 * h) - 8 * fun(R - h) + 8 * fun(R + h) - fun(R + 2 * h)) / (12 * h)

    def d2(fun, R):
        return (-fun(R - 2 * h) + 16 * fun(R - h) - 30 * fun(R) + 16 * fun(R + h) - fun(R + 2 * h)) / (12 * h * h)

    def L(fun):
        return lambda R: -d2(fun, R) + pot.p(R) / R ** 2 * fun(R)

    u = lambda R: np.exp(-(R - 2.0) ** 2)
    Ru = lambda R: R * d1(u, R)
    R = np.linspace(0.8, 4.0, 17)
    lhs = L(Ru)(R) - R * d1(L(u), R)
    rhs = 2 * L(u)(R) + pot.W(R) * u(R)
    assert np.max(np.abs(lhs - rhs)) < 1e-5


# fundamental system

def test_phi0_closed_form(fs):
    R = np.geomspace(1e-3, 1e3, 200)
    assert np.allclose(fs.phi0(R), sphere_phi0(R), rtol=1e-9)


def test_theta0_normalization_and_quadrature(fs):
    assert abs(float(fs.theta0(1.0))) < 1e-14
    for R in (0.05, 0.5, 3.0, 20.0):
        integral = quad(lambda s: float(sphere_phi0(s)) ** -2, 1.0, R, epsrel=1e-12)[0]
        assert float(fs.theta0(R)) == pytest.approx(-float(sphere_phi0(R)) * integral, rel=1e-8)


def test_theta0_independent_path(fs_bumpy):
    R = np.array([0.01, 0.3, 2.0, 50.0])
    assert np.allclose(fs_bumpy.theta0(R), fs_bumpy.theta0_via_chi(R), rtol=1e-8)


@pytest.mark.parametrize("which", ["fs", "fs_bumpy"])
def test_unit_wronskian(which, request):
    f = request.getfixturevalue(which)
    R = np.array([0.01, 1.0, 100.0])
    assert np.max(np.abs(f.wronskian(R) - 1)) <= 1e-9


def test_free_fundamental_system(pot_free):
    f = FundamentalSystem(pot_free)
    R = np.geomspace(1e-2, 1e2, 30)
    assert np.allclose(f.phi0(R), R ** 1.5)
    assert np.allclose(f.theta0(R), 0.5 * (R ** -0.5 - R ** 1.5))
    assert np.allclose(f.integral(R), 0.5 * (1 - R ** -2.0))


def test_fundamental_asymptotics(fs):
    # phi0 ~ A0 R^3/2 at 0 and ~ B0 R^-1/2 at infinity, theta0 ~ R^-1/2 / (2 A0) at 0
    A0, B0 = 2 * TAN_HALF, 2 / TAN_HALF
    assert float(fs.phi0(1e-4)) / 1e-6 == pytest.approx(A0, rel=1e-7)
    assert float(fs.phi0(1e4)) * 1e2 == pytest.approx(B0, rel=1e-7)
    assert float(fs.theta0(1e-4)) * 1e-2 == pytest.approx(1 / (2 * A0), rel=1e-5)


# eigenfunctions

def test_phi_at_zero_energy_is_phi0(fs, series):
    r = np.geomspace(1e-3, 1e2, 40)
    assert np.allclose(series.evaluate(r, 0.0)[0], fs.phi0(r), rtol=1e-12)


def test_free_eigenfunction_is_bessel(pot_free):
    for xi in (0.01, 1.0, 50.0):
        r = np.linspace(0.1, 20, 400) / math.sqrt(xi)
        phi = compute_phi(pot_free, r, xi)
        err = np.abs(phi - bessel_phi(r, xi)) / bessel_amplitude(r, xi)
        assert np.max(err) <= 1e-7


def test_eigenfunction_solves_the_equation(sdata):
    # (L - xi) phi = 0 by differences of the returned r-derivative
    i = 50
    xi = sdata.xi[i]
    r = np.geomspace(0.05, 3 * sdata.r_asym[i], 80)
    h = 1e-5 * r
    dplus = sdata.phi(i, r + h)[1]
    dminus = sdata.phi(i, r - h)[1]
    phi = sdata.phi(i, r)[0]
    res = -(dplus - dminus) / (2 * h) + sdata.potential.p(r) / r ** 2 * phi - xi * phi
    scale = np.max(np.abs(phi)) * max(xi, 1.0)
    assert np.max(np.abs(res)) <= 1e-5 * scale


def test_volterra_iterates_vanish_at_zero(series):
    for j in range(1, 8):
        assert abs(series.phi_j_at_zero(j)) <= 1e-10


def test_free_volterra_iterates(pot_free):
    s = PhiSeries(FundamentalSystem(pot_free), n_terms=6, r_max=1e3)
    u = np.geomspace(1e-4, 1e4, 30)
    for j in range(1, 7):
        ref = (-1) ** j * u / (4 ** j * math.factorial(j) * math.factorial(j + 1))
        assert np.allclose(s.phi_j(j, u), ref, rtol=1e-9)


def test_volterra_bound_is_stable(fs, series):
    b1 = fit_volterra_bound(series)
    finer = PhiSeries(fs, panel_width=0.25)
    b2 = fit_volterra_bound(finer, n_samples=4000)
    assert b1.C > 0 and b1.C2 > 0
    assert abs(b2.C / b1.C - 1) < 0.2 and abs(b2.C2 / b1.C2 - 1) < 0.2
    u = np.geomspace(*b1.u_range, 500)
    for j in range(1, 9):
        bound = b1.C2 * b1.C ** j / math.factorial(j - 1) * np.log1p(u)
        assert np.all(np.abs(series.phi_j(j, u)) <= bound * (1 + 1e-12))


def test_first_iterate_grows_like_u_log_u(series):
    c = first_iterate_lower_constant(series)
    assert c > 0.1
    u = np.geomspace(1e2, 1e4, 50)
    assert np.all(series.f(1, np.sqrt(u))[0] < 0)


def test_lower_bound_shadow(pot):
    # |phi(r, xi) - phi0(r)| is comparable to xi r^2 log r when xi r^2 is small
    xi, r = 1e-4, 10.0
    phi = float(compute_phi(pot, np.array([r]), xi)[0])
    phi0 = float(sphere_phi0(r))
    diff = abs(phi - phi0)
    scale = xi * r * r * math.log(r) * phi0
    assert 0.05 * scale < diff < 20 * scale


# symbols

def test_symbol_leading_order(pot):
    xi = 1.0
    q = np.geomspace(10, 1e4, 50)
    psi = compute_psi_plus(pot, q, xi)
    dev = np.abs(psi * xi ** 0.25 * np.exp(-1j * q) - 1)
    assert np.max(dev * q) < 5


def test_second_symbol_coefficient_limit(pot, pot_free):
    S = PsiSymbols(pot)
    assert complex(S.coefficient(1, np.array([1e6]))[0]) == pytest.approx(3j / 8, abs=1e-6)
    Sf = PsiSymbols(pot_free)
    assert complex(Sf.coefficient(1, np.array([10.0]))[0]) == pytest.approx(3j / 8, abs=1e-14)


def test_free_jost_solution_is_hankel(pot_free):
    c = math.sqrt(math.pi / 2) * np.exp(3j * math.pi / 4)
    for xi in (0.01, 2.0, 100.0):
        r = np.geomspace(10, 1e3, 40) / math.sqrt(xi)
        ref = c * np.sqrt(r) * hankel1(1, r * math.sqrt(xi))
        psi = compute_psi_plus(pot_free, r, xi)
        assert np.max(np.abs(psi / ref - 1)) <= 1e-6


# measure

def test_free_density(sdata_free):
    assert np.max(np.abs(sdata_free.rho / (sdata_free.xi / 8) - 1)) <= 1e-6


def test_density_positive_and_jost_stable(sdata):
    assert np.all(sdata.rho > 0)
    assert np.max(sdata.a_variation) <= 1e-6


def test_density_large_xi_slope(sdata):
    sel = sdata.xi >= 10
    slope = np.polyfit(np.log(sdata.xi[sel]), np.log(sdata.rho[sel]), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.05)


def test_density_small_xi_law(sdata):
    sel = sdata.xi <= 1e-2
    x = sdata.xi[sel]
    ratio = 1.0 / (x * np.log(x) ** 2 * sdata.rho[sel])
    assert np.all(ratio > 0) and np.max(ratio) <= 10
    assert np.max(ratio) / np.min(ratio) < 2


def test_log_derivative_two_ways(sdata):
    a = sdata.log_derivative_rho()[1:-1]
    b = sdata.log_derivative_rho_from_a()[1:-1]
    assert np.max(np.abs(a - b)) < 1e-2


def test_small_xi_extrapolation(pot):
    d = build_spectral_data(pot, np.array([1e-12, 1e-11, 1e-10]))
    tail = low_tail(d, 1e-12)
    assert np.all(np.abs(small_xi_law(tail, d.xi) / d.rho - 1) <= 1e-4)


def test_spectral_data_rejects_bad_grid(pot):
    with pytest.raises(ValueError):
        build_spectral_data(pot, np.array([0.0, 1.0]))
