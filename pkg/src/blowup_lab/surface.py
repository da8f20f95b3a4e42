"""Generating functions of rotationally symmetric target surfaces.

A surface of revolution is described by a profile ``g``: the metric is
``d rho^2 + g(rho)^2 d theta^2``.  Admissible profiles are entire, odd
about ``0`` and about their first positive zero ``rho_M``, satisfy
``g'(0) = 1``, ``g'(rho_M) = -1`` and ``|g'| < 1`` strictly between.
The nonlinearity of the co-rotational wave map is ``f = g g'``.

Two kinds are supported: the round sphere (closed form) and a profile
given by the even Taylor coefficients of ``G`` with ``g(rho) = rho G(rho^2)``.

Evaluators come in two flavours.  ``g``, ``dg`` and friends take ``rho``
directly.  The ``*_top`` variants take the distance ``delta = rho_M - rho``
to the far pole, so that quantities that vanish there keep full relative
accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import bisect

from .errors import InvalidProfileError

DEFAULT_TERMS = 24


def sphere_series_coeffs(n: int = DEFAULT_TERMS) -> np.ndarray:
    """Even Taylor coefficients of ``sin(rho)/rho``."""
    return np.array([(-1) ** k / math.factorial(2 * k + 1) for k in range(n)])


def perturbed_sphere_coeffs(eps: float, n: int = DEFAULT_TERMS) -> np.ndarray:
    """Even Taylor coefficients of ``G`` for ``g = sin(rho) (1 + eps sin(rho)^2)``.

    The profile keeps both reflection symmetries of the sphere and is
    admissible for ``0 <= eps < 1/6``.
    """
    sin2 = np.array([0.0] + [-((-4.0) ** k) / (2.0 * math.factorial(2 * k)) for k in range(1, n)])
    factor = eps * sin2
    factor[0] += 1.0
    out = np.zeros(n)
    base = sphere_series_coeffs(n)
    for k in range(n):
        out[k] = np.dot(base[:k + 1], factor[k::-1])
    return out


class SurfaceProfile:
    """Common interface; concrete profiles implement the ``_``-prefixed hooks."""

    kind: str = "abstract"
    rho_M: float

    # -- derivatives of g and f at rho ---------------------------------
    def dg(self, rho, k: int = 0):
        raise NotImplementedError

    def df(self, rho, k: int = 0):
        raise NotImplementedError

    def dg_top(self, delta, k: int = 0):
        """``g^{(k)}(rho_M - delta)``."""
        raise NotImplementedError

    def df_top(self, delta, k: int = 0):
        """``f^{(k)}(rho_M - delta)``."""
        raise NotImplementedError

    def G(self, x):
        """``g(rho)/rho`` as a function of ``x = rho^2``."""
        raise NotImplementedError

    def F(self, x):
        """``f(rho)/rho`` as a function of ``x = rho^2``."""
        raise NotImplementedError

    def g_over_delta_top(self, delta):
        """``g(rho_M - delta)/delta``, finite at ``delta = 0``."""
        raise NotImplementedError

    def one_minus_g1(self, rho):
        raise NotImplementedError

    def one_minus_f1(self, rho):
        raise NotImplementedError

    def one_minus_f1_top(self, delta):
        raise NotImplementedError

    # -- convenience names ----------------------------------------------
    def g(self, rho):
        return self.dg(rho, 0)

    def g1(self, rho):
        return self.dg(rho, 1)

    def g2(self, rho):
        return self.dg(rho, 2)

    def g3(self, rho):
        return self.dg(rho, 3)

    def f(self, rho):
        return self.df(rho, 0)

    def f1(self, rho):
        return self.df(rho, 1)

    def f2(self, rho):
        return self.df(rho, 2)

    def taylor_g(self, rho0, n: int) -> np.ndarray:
        """Taylor coefficients ``g^{(k)}(rho0)/k!`` for ``k = 0..n-1`` (last axis)."""
        rho0 = np.asarray(rho0, dtype=float)
        return np.stack([self.dg(rho0, k) / math.factorial(k) for k in range(n)], axis=-1)

    def taylor_f1(self, rho0, n: int) -> np.ndarray:
        """Taylor coefficients of ``f'`` at ``rho0``."""
        rho0 = np.asarray(rho0, dtype=float)
        return np.stack([self.df(rho0, k + 1) / math.factorial(k) for k in range(n)], axis=-1)

    def G_coeffs(self, n: int) -> np.ndarray:
        """Taylor coefficients of ``G`` (in ``x = rho^2``)."""
        raise NotImplementedError

    def G_top_coeffs(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def energy_of_harmonic_map(self) -> float:
        """``int_0^rho_M g``, the energy of the degree-one harmonic map."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "rho_M": self.rho_M}


class SphereProfile(SurfaceProfile):
    """The round unit sphere, ``g = sin``."""

    kind = "sphere"

    def __init__(self):
        self.rho_M = math.pi

    def dg(self, rho, k=0):
        return np.sin(np.asarray(rho, dtype=float) + 0.5 * math.pi * k)

    def df(self, rho, k=0):
        rho = np.asarray(rho, dtype=float)
        return 2.0 ** (k - 1) * np.sin(2.0 * rho + 0.5 * math.pi * k)

    def dg_top(self, delta, k=0):
        # sin(pi - d) = sin(d); each derivative in rho is minus a derivative in d
        return (-1) ** k * np.sin(np.asarray(delta, dtype=float) + 0.5 * math.pi * k)

    def df_top(self, delta, k=0):
        # f(pi - d) = -sin(2d)/2
        d = np.asarray(delta, dtype=float)
        return -((-1) ** k) * 2.0 ** (k - 1) * np.sin(2.0 * d + 0.5 * math.pi * k)

    def G(self, x):
        return np.sinc(np.sqrt(np.asarray(x, dtype=float)) / math.pi)

    def F(self, x):
        return np.sinc(2.0 * np.sqrt(np.asarray(x, dtype=float)) / math.pi)

    def g_over_delta_top(self, delta):
        return np.sinc(np.asarray(delta, dtype=float) / math.pi)

    def one_minus_g1(self, rho):
        return 2.0 * np.sin(0.5 * np.asarray(rho, dtype=float)) ** 2

    def one_minus_f1(self, rho):
        return 2.0 * np.sin(np.asarray(rho, dtype=float)) ** 2

    def one_minus_f1_top(self, delta):
        return 2.0 * np.sin(np.asarray(delta, dtype=float)) ** 2

    def G_coeffs(self, n):
        return sphere_series_coeffs(n)

    def G_top_coeffs(self, n):
        return sphere_series_coeffs(n)

    def energy_of_harmonic_map(self):
        return 2.0


class SeriesProfile(SurfaceProfile):
    """``g(rho) = rho * sum_k c_k rho^(2k)`` with ``c_0 = 1``."""

    kind = "series"

    def __init__(self, G_coeffs, rho_M_hint: float, n_terms: int = DEFAULT_TERMS):
        c = np.asarray(G_coeffs, dtype=float).ravel()[:n_terms]
        if c.size == 0 or not np.all(np.isfinite(c)):
            raise InvalidProfileError("profile coefficients must be finite and non-empty")
        if abs(c[0] - 1.0) > 1e-14:
            raise InvalidProfileError("profile must satisfy g'(0) = 1 (leading coefficient 1)")
        if not (np.isfinite(rho_M_hint) and rho_M_hint > 0):
            raise InvalidProfileError("rho_M_hint must be a positive number")
        self.coeffs = c
        self.rho_M_hint = float(rho_M_hint)
        odd = np.zeros(2 * c.size)
        odd[1::2] = c
        self._g = [Polynomial(odd)]
        for _ in range(6 + 2 * c.size):
            self._g.append(self._g[-1].deriv())
        f = self._g[0] * self._g[1]
        self._f = [f]
        for _ in range(6 + 4 * c.size):
            self._f.append(self._f[-1].deriv())
        self._one_minus_g1 = Polynomial([1.0]) - self._g[1]
        self._one_minus_g1.coef[0] = 0.0
        self._one_minus_f1 = Polynomial([1.0]) - self._f[1]
        self._one_minus_f1.coef[0] = 0.0
        self.rho_M = self._locate_rho_M()
        shift = Polynomial([self.rho_M, -1.0])
        gt = self._g[0](shift)
        gt.coef[0] = 0.0
        self._gt = [gt]
        for _ in range(6 + 2 * c.size):
            self._gt.append(self._gt[-1].deriv())
        ft = -(gt * gt.deriv())
        self._ft = [ft]
        for _ in range(6 + 4 * c.size):
            self._ft.append(self._ft[-1].deriv())
        # 1 - f'(rho_M - d) = 1 + d/dd f(rho_M - d)
        self._one_minus_f1_top = Polynomial([1.0]) + self._ft[1]
        # the truncated polynomial is odd about rho_M only up to truncation error,
        # so keep every coefficient of the re-expansion
        self._gt_over_d = Polynomial(gt.coef[1:]) if gt.coef.size > 1 else Polynomial([0.0])
        self._Gt_odd = gt.coef[1::2]
        self._F = Polynomial(f.coef[1::2])
        self._G = Polynomial(c)
        self.truncation_radius = _root_test_radius(c)

    def _locate_rho_M(self) -> float:
        g = self._g[0]
        hi = 2.0 * self.rho_M_hint
        grid = np.linspace(0.0, hi, 4001)[1:]
        vals = g(grid)
        sign_change = np.nonzero(np.sign(vals[1:]) * np.sign(vals[:-1]) <= 0)[0]
        if vals[0] <= 0 or sign_change.size == 0:
            raise InvalidProfileError(
                f"rho_M not bracketed: no sign change of g on (0, {hi:g}] near hint {self.rho_M_hint:g}")
        i = sign_change[0]
        a, b = grid[i], grid[i + 1]
        if vals[i + 1] == 0.0:
            return float(b)
        return float(bisect(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))

    def dg(self, rho, k=0):
        return self._g[k](np.asarray(rho, dtype=float))

    def df(self, rho, k=0):
        return self._f[k](np.asarray(rho, dtype=float))

    def dg_top(self, delta, k=0):
        return (-1) ** k * self._gt[k](np.asarray(delta, dtype=float))

    def df_top(self, delta, k=0):
        return (-1) ** k * self._ft[k](np.asarray(delta, dtype=float))

    def G(self, x):
        return self._G(np.asarray(x, dtype=float))

    def F(self, x):
        return self._F(np.asarray(x, dtype=float))

    def g_over_delta_top(self, delta):
        return self._gt_over_d(np.asarray(delta, dtype=float))

    def one_minus_g1(self, rho):
        return self._one_minus_g1(np.asarray(rho, dtype=float))

    def one_minus_f1(self, rho):
        return self._one_minus_f1(np.asarray(rho, dtype=float))

    def one_minus_f1_top(self, delta):
        return self._one_minus_f1_top(np.asarray(delta, dtype=float))

    def G_coeffs(self, n):
        out = np.zeros(n)
        m = min(n, self.coeffs.size)
        out[:m] = self.coeffs[:m]
        return out

    def G_top_coeffs(self, n):
        c = self._Gt_odd
        out = np.zeros(n)
        m = min(n, c.size)
        out[:m] = c[:m]
        return out

    def energy_of_harmonic_map(self):
        return float(self._g[0].integ()(self.rho_M))

    def describe(self):
        return {"kind": self.kind, "rho_M": self.rho_M, "rho_M_hint": self.rho_M_hint,
                "n_terms": int(self.coeffs.size), "coeffs": self.coeffs.tolist(),
                "truncation_radius": self.truncation_radius}


def _root_test_radius(c: np.ndarray) -> float:
    """Crude convergence radius in ``rho`` implied by the tail of the coefficients."""
    k = np.arange(c.size)
    mask = (k >= max(1, c.size // 2)) & (np.abs(c) > 0)
    if not np.any(mask):
        return math.inf
    est = np.abs(c[mask]) ** (-1.0 / (2 * k[mask]))
    return float(np.min(est))


def make_sphere() -> SphereProfile:
    return SphereProfile()


def make_from_series(G_coeffs, rho_M_hint: float, n_terms: int = DEFAULT_TERMS) -> SeriesProfile:
    return SeriesProfile(G_coeffs, rho_M_hint, n_terms=n_terms)


@dataclass
class ValidationEntry:
    assumption: str
    status: str
    worst_rho: float
    worst_value: float


@dataclass
class ValidationReport:
    entries: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.status != "fail" for e in self.entries)

    def failures(self) -> list:
        return [e for e in self.entries if e.status == "fail"]

    def as_rows(self):
        return [(e.assumption, e.status, e.worst_rho, e.worst_value) for e in self.entries]


def validate(p: SurfaceProfile, n_samples: int = 2001, tol: float = 1e-10) -> ValidationReport:
    """Check the standing assumptions on a sample grid of ``[0, rho_M]``."""
    if n_samples < 16:
        raise InvalidProfileError("need at least 16 samples")
    rho_M = p.rho_M
    rho = np.linspace(0.0, rho_M, n_samples)
    inner = rho[1:-1]
    report = ValidationReport()

    def add(name, values, where, bad):
        values = np.asarray(values, dtype=float)
        i = int(np.argmax(np.abs(values))) if values.size else 0
        report.entries.append(ValidationEntry(name, "fail" if bad else "pass",
                                              float(where[i]) if values.size else 0.0,
                                              float(values[i]) if values.size else 0.0))

    g0 = np.atleast_1d(p.g(0.0))
    add("g(0)=0", g0, [0.0], abs(g0[0]) > tol)
    gM = np.atleast_1d(p.g(rho_M))
    add("g(rho_M)=0", gM, [rho_M], abs(gM[0]) > tol)
    d0 = np.atleast_1d(p.g1(0.0) - 1.0)
    add("g'(0)=1", d0, [0.0], abs(d0[0]) > tol)
    dM = np.atleast_1d(p.g1(rho_M) + 1.0)
    add("g'(rho_M)=-1", dM, [rho_M], abs(dM[0]) > 1e3 * tol)

    gi = p.g(inner)
    add("g>0 on (0,rho_M)", np.minimum(gi, 0.0), inner, bool(np.any(gi <= 0)))

    excess = np.abs(p.g1(inner)) - 1.0
    i = int(np.argmax(excess))
    report.entries.append(ValidationEntry("|g'|<1 on (0,rho_M)", "fail" if excess[i] >= 0 else "pass",
                                          float(inner[i]), float(excess[i])))

    odd0 = p.g(-rho) + p.g(rho)
    add("odd about 0", odd0, rho, np.max(np.abs(odd0)) > tol)
    # a truncated series is only trustworthy a moderate distance past rho_M
    d = 0.5 * rho
    oddM = p.g(rho_M + d) + p.g(rho_M - d)
    add("odd about rho_M", oddM, rho_M - d, np.max(np.abs(oddM)) > 1e3 * tol)

    fcons = p.f(rho) - p.g(rho) * p.g1(rho)
    add("f=g*g'", fcons, rho, np.max(np.abs(fcons)) > tol)

    small = np.geomspace(1e-8, 1e-2, 13)
    lim0 = p.f(small) / small - 1.0
    add("f(rho)/rho->1 at 0", lim0, small, np.max(np.abs(lim0[:4])) > 1e-6)
    limM = p.df_top(small, 0) / small + 1.0
    add("f(rho_M-d)/d->-1", limM, rho_M - small, np.max(np.abs(limM[:4])) > 1e-6)

    if isinstance(p, SeriesProfile):
        report.entries.append(ValidationEntry("truncation radius", "info", p.truncation_radius,
                                              float(p.truncation_radius / rho_M)))
    return report
