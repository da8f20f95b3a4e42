import math

import numpy as np
import pytest

from blowup_lab.harmonic_map import solve_harmonic_map
from blowup_lab.profile import BlowupFrame, solve_corrector
from blowup_lab.spectral import FundamentalSystem, Potential
from blowup_lab.surface import make_from_series, make_sphere, perturbed_sphere_coeffs

TAN_HALF = math.tan(0.5)

_criteria = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_criteria] = []


@pytest.fixture
def criterion(request):
    """``criterion(label, ok, detail)`` prints and records one PASS/FAIL line."""
    def record(label, ok, detail=""):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        print(line)
        request.config.stash[_criteria].append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_criteria, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def sphere_Q(r):
    return 2.0 * np.arctan(np.asarray(r, dtype=float) * TAN_HALF)


def sphere_Qprime(r):
    r = np.asarray(r, dtype=float)
    return 2.0 * TAN_HALF / (1.0 + (TAN_HALF * r) ** 2)


@pytest.fixture(scope="session")
def sphere():
    return make_sphere()


@pytest.fixture(scope="session")
def bumpy():
    """A user-series surface: the sphere with a small even perturbation of ``G``."""
    return make_from_series(perturbed_sphere_coeffs(0.05), 3.0)


@pytest.fixture(scope="session")
def hm(sphere):
    return solve_harmonic_map(sphere)


@pytest.fixture(scope="session")
def hm_bumpy(bumpy):
    return solve_harmonic_map(bumpy)


@pytest.fixture(scope="session")
def pot(hm):
    return Potential(hm)


@pytest.fixture(scope="session")
def pot_free():
    return Potential.free()


@pytest.fixture(scope="session")
def fs(pot):
    return FundamentalSystem(pot)


@pytest.fixture(scope="session")
def frame1():
    return BlowupFrame(1.0)


@pytest.fixture(scope="session")
def corr1(frame1, hm):
    return solve_corrector(frame1, hm)


@pytest.fixture(scope="session")
def tdata(pot):
    from blowup_lab.spectral.transform import build_transform_data
    return build_transform_data(pot)


@pytest.fixture(scope="session")
def tdata_free(pot_free):
    from blowup_lab.spectral.transform import build_transform_data
    return build_transform_data(pot_free)


@pytest.fixture(scope="session")
def kernel40(pot):
    from blowup_lab.spectral.measure import build_spectral_data
    from blowup_lab.transference import build_kernel_table
    data = build_spectral_data(pot, np.geomspace(1e-3, 1e2, 40))
    return build_kernel_table(data, derivatives=True)


def smooth_bump(r, lo=1.0, hi=3.0):
    """C-infinity bump supported in ``[lo, hi]``."""
    r = np.asarray(r, dtype=float)
    x = (2 * r - (lo + hi)) / (hi - lo)
    out = np.zeros_like(r)
    inside = np.abs(x) < 1
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out
