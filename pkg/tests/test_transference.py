import numpy as np
import pytest

from blowup_lab.spectral.measure import build_spectral_data
from blowup_lab.transference import (apply_kernel, build_kernel_table, compute_F, compute_K0,
                                     diag_coefficient, fit_bound_constants)

from conftest import smooth_bump


def bump_derivative(r, lo=1.0, hi=3.0):
    r = np.asarray(r, dtype=float)
    x = (2 * r - (lo + hi)) / (hi - lo)
    out = np.zeros_like(r)
    inside = np.abs(x) < 1
    xi = x[inside]
    out[inside] = np.exp(-1.0 / (1.0 - xi ** 2)) * (-2 * xi / (1 - xi ** 2) ** 2) * 2 / (hi - lo)
    return out


@pytest.fixture(scope="module")
def kernel20(pot):
    data = build_spectral_data(pot, np.geomspace(1e-3, 1e2, 20))
    return build_kernel_table(data, derivatives=True)


def test_F_pointwise_symmetry(pot):
    assert abs(compute_F(pot, 0.3, 0.7) - compute_F(pot, 0.7, 0.3)) <= 1e-8


def test_F_table_symmetric_and_finite(kernel40):
    assert np.all(np.isfinite(kernel40.F))
    assert np.max(np.abs(kernel40.F - kernel40.F.T)) <= 1e-8


def test_free_kernel_vanishes(pot_free):
    data = build_spectral_data(pot_free, np.geomspace(0.1, 10, 6))
    table = build_kernel_table(data)
    assert np.all(table.F == 0)
    # rho = xi / 8 gives eta rho'/rho = 1 in the interior
    assert np.allclose(table.diag[1:-1], -2.5, atol=1e-6)


def test_K0_outside_band_and_residue(kernel40):
    T = kernel40
    i, j = 10, 20
    k0 = T.K0(i, j)
    assert np.isfinite(k0)
    assert k0 * (T.xi[j] - T.xi[i]) / T.rho[i] == pytest.approx(T.F[i, j], rel=1e-14)
    assert compute_K0(T, T.xi[i], T.xi[j]) == k0
    # F(xi, xi) does not vanish, so K0 has a genuine principal-value pole
    assert abs(T.F[20, 20]) > 0.1


def test_K0_rejects_the_diagonal_band(kernel40):
    with pytest.raises(ValueError, match="diagonal band"):
        kernel40.K0(10, 11)
    with pytest.raises(ValueError, match="not a node"):
        compute_K0(kernel40, 0.123456, kernel40.xi[3])


def test_small_frequency_bound_stable(kernel20, kernel40):
    def ratio(T):
        X, E = np.meshgrid(T.xi, T.xi, indexing="ij")
        m = X + E <= 1
        return np.max(np.abs(T.F[m]) / (X + E)[m])
    r20, r40 = ratio(kernel20), ratio(kernel40)
    assert np.isfinite(r40) and abs(r40 / r20 - 1) < 0.05


def test_diagonal_decay_bounded(kernel40):
    T = kernel40
    sel = T.xi >= 1
    v = np.abs(np.diag(T.F)[sel]) * (2 * T.xi[sel]) ** 1.5
    assert np.max(v) < 20
    steps = np.diff(v)
    assert steps[-1] < 0.5 * steps[len(steps) // 2]      # the growth is saturating


def test_bound_constants_stable(kernel20, kernel40):
    b20, b40 = fit_bound_constants(kernel20), fit_bound_constants(kernel40)
    for a, b in ((b20.value, b40.value), (b20.first, b40.first), (b20.mixed, b40.mixed)):
        assert np.isfinite(b) and abs(b / a - 1) < 0.1


def test_diag_coefficient_needs_interior(kernel40, pot):
    data = build_spectral_data(pot, np.geomspace(1.0, 10.0, 5))
    with pytest.raises(ValueError, match="interior"):
        diag_coefficient(data, 1.0)
    assert np.isnan(kernel40.diag[0]) and np.isnan(kernel40.diag[-1])


def test_diag_coefficient_large_eta(pot):
    data = build_spectral_data(pot, np.geomspace(1e3, 1e5, 21))
    c = diag_coefficient(data, data.xi[1:-1])
    assert np.all(np.abs(c + 2.5) < 0.1)
    assert np.allclose(c, diag_coefficient(data, data.xi[1:-1], from_a=True), atol=1e-3)


def test_diag_coefficient_small_eta_follows_log_law(pot):
    # eta rho'/rho = -1 - 2 (L + b) / ((L + b)^2 + pi^2) with L = log eta
    from blowup_lab.spectral.transform import low_tail
    data = build_spectral_data(pot, np.geomspace(1e-7, 1e-4, 13))
    tail = low_tail(data)
    eta = data.xi[1:-1]
    L = np.log(eta) + tail.b
    law = -(1.5 - 1 - 2 * L / (L * L + np.pi ** 2))
    gap = np.abs(diag_coefficient(data, eta, from_a=True) - law)
    # the law is the leading small-eta asymptotics; the remainder fades as eta -> 0
    assert np.max(gap) < 5e-3 and gap[0] < 1e-4 and np.all(np.diff(gap) > 0)


@pytest.mark.parametrize("which,tol", [("tdata", 1e-5), ("tdata_free", 1e-9)])
def test_transference_identity(which, tol, request):
    # transform of R u' equals -2 eta d/deta u_hat + K u_hat
    from blowup_lab.spectral.transform import radial_quadrature
    d = request.getfixturevalue(which)
    # the bump's flat edges need a fine radial rule for 1e-10 accuracy
    r, w = radial_quadrature(1.0, 3.0, 200.0)
    f = smooth_bump(r)
    eta = np.array([0.3, 1.0, 3.0, 10.0])
    ka = apply_kernel(d, r, f, w, eta)
    de = build_spectral_data(d.potential, eta)
    lhs = de.phi_values(r) @ (w * r * bump_derivative(r))
    rhs = -2 * eta * ka.dfhat + ka.Kf
    assert np.max(np.abs(lhs - rhs)) <= tol
