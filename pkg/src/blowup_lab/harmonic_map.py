"""Degree-one co-rotational harmonic map ``Q`` into a surface of revolution.

``Q`` solves ``r Q' = g(Q)`` with ``Q(1) = 1``.  In ``s = log r`` this is
the autonomous equation ``dQ/ds = g(Q)``.  It is integrated in two halves
so that both ends keep relative accuracy:

* for ``s <= 0`` the unknown is ``log Q`` with ``d log Q/ds = G(Q^2)``;
* for ``s >= 0`` the unknown is ``log(rho_M - Q)`` with
  ``d log(rho_M - Q)/ds = -g(Q)/(rho_M - Q)``.

For ``|s| > SERIES_SWITCH`` the odd power series ``Q = r A(r^2)`` and
``rho_M - Q = r^-1 B(r^-2)`` take over; there they are exact to rounding,
while the ODE table carries the integrator's local noise (which would
swamp the tiny differences of ``Q'`` between neighbouring radii).  The
leading coefficients ``A(0)`` and ``B(0)`` are extracted by Richardson
extrapolation of ``Q/r`` and ``r (rho_M - Q)`` at the window ends.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import series
from ._panels import PanelGrid
from .errors import ConvergenceError, InvalidProfileError
from .surface import SurfaceProfile

log = logging.getLogger(__name__)

TAIL_TERMS = 8
SERIES_SWITCH = 4.0


@dataclass
class HarmonicMap:
    surface: SurfaceProfile
    s_min: float
    s_max: float
    tol: float
    A0: float
    B0: float
    _left: "_Table" = field(repr=False)
    _right: "_Table" = field(repr=False)
    _A: np.ndarray = field(repr=False)
    _B: np.ndarray = field(repr=False)

    @property
    def rho_M(self) -> float:
        return self.surface.rho_M

    # -- core evaluation ---------------------------------------------------
    def _split(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("r must be non-negative")
        return r, np.log(np.where(r > 0, r, 1.0))

    def eval_Q_and_delta(self, r):
        """Return ``(Q, rho_M - Q)`` computed on the side that keeps relative accuracy."""
        r, s = self._split(r)
        Q = np.empty_like(r)
        D = np.empty_like(r)
        flat_r, flat_s = r.ravel(), s.ravel()
        Qf, Df = Q.ravel(), D.ravel()
        left = flat_s <= 0
        # left half
        lo = max(self.s_min, -SERIES_SWITCH)
        hi = min(self.s_max, SERIES_SWITCH)
        m = left & (flat_s >= lo) & (flat_r > 0)
        if np.any(m):
            Qf[m] = np.exp(self._left(flat_s[m])[0])
        m = left & ((flat_s < lo) | (flat_r == 0))
        if np.any(m):
            x = flat_r[m]
            Qf[m] = x * np.polynomial.polynomial.polyval(x * x, self._A)
        Df[left] = self.rho_M - Qf[left]
        # right half
        m = ~left & (flat_s <= hi)
        if np.any(m):
            Df[m] = np.exp(self._right(flat_s[m])[0])
        m = ~left & (flat_s > hi)
        if np.any(m):
            y = 1.0 / flat_r[m]
            Df[m] = y * np.polynomial.polynomial.polyval(y * y, self._B)
        Qf[~left] = self.rho_M - Df[~left]
        return Q, D

    def eval_Q(self, r):
        return self.eval_Q_and_delta(r)[0]

    def eval_delta(self, r):
        return self.eval_Q_and_delta(r)[1]

    def g_of_Q(self, r):
        """``g(Q(r))`` with relative accuracy at both ends."""
        r = np.asarray(r, dtype=float)
        Q, D = self.eval_Q_and_delta(r)
        left = np.log(np.where(r > 0, r, 1.0)) <= 0
        return np.where(left, Q * self.surface.G(Q * Q), D * self.surface.g_over_delta_top(D))

    def g1_of_Q(self, r):
        r = np.asarray(r, dtype=float)
        Q, D = self.eval_Q_and_delta(r)
        left = np.log(np.where(r > 0, r, 1.0)) <= 0
        return np.where(left, self.surface.g1(Q), self.surface.dg_top(D, 1))

    def one_minus_f1_of_Q(self, r):
        r = np.asarray(r, dtype=float)
        Q, D = self.eval_Q_and_delta(r)
        left = np.log(np.where(r > 0, r, 1.0)) <= 0
        return np.where(left, self.surface.one_minus_f1(Q), self.surface.one_minus_f1_top(D))

    def one_minus_g1_of_Q(self, r):
        r = np.asarray(r, dtype=float)
        Q, D = self.eval_Q_and_delta(r)
        left = np.log(np.where(r > 0, r, 1.0)) <= 0
        return np.where(left, self.surface.one_minus_g1(Q), 1.0 - self.surface.dg_top(D, 1))

    def f2_of_Q(self, r):
        r = np.asarray(r, dtype=float)
        Q, D = self.eval_Q_and_delta(r)
        left = np.log(np.where(r > 0, r, 1.0)) <= 0
        return np.where(left, self.surface.f2(Q), self.surface.df_top(D, 2))

    def eval_Qprime(self, r):
        """``Q'(r) = g(Q)/r``; at ``r = 0`` the limit ``A(0)``."""
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1.0)
        out = np.where(r > 0, self.g_of_Q(safe) / safe, self.A0)
        # in the series ranges differentiate the series term by term: Horner's
        # rule then ends in A0 + (small), which keeps neighbouring values ordered
        # even where they differ by a few ulps
        s = np.log(safe)
        lo = (r == 0) | (s < max(self.s_min, -SERIES_SWITCH))
        hi = (r > 0) & (s > min(self.s_max, SERIES_SWITCH))
        k = np.arange(self._A.size)
        if np.any(lo):
            x = r[lo]
            out[lo] = np.polynomial.polynomial.polyval(x * x, (2 * k + 1) * self._A)
        if np.any(hi):
            y = 1.0 / r[hi]
            k = np.arange(self._B.size)
            out[hi] = y * y * np.polynomial.polynomial.polyval(y * y, (2 * k + 1) * self._B)
        return out

    def eval_Qsecond(self, r):
        """``Q''(r) = -g(Q)(1 - g'(Q))/r^2``; zero on the axis."""
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1.0)
        # divide by r twice: r^2 underflows for denormal radii
        val = -(self.g_of_Q(safe) / safe) * (self.one_minus_g1_of_Q(safe) / safe)
        return np.where(r > 0, val, 0.0)

    def s_taylor(self, r, n: int) -> np.ndarray:
        """Taylor coefficients of ``Q`` in ``s = log r`` around each point (last axis)."""
        Q0 = np.atleast_1d(np.asarray(self.eval_Q(r), dtype=float))
        q = np.zeros(Q0.shape + (n,))
        q[..., 0] = Q0
        gt = self.surface.taylor_g(Q0, n)
        for k in range(n - 1):
            inner = q.copy()
            inner[..., 0] = 0.0
            comp = series.compose(gt, inner)
            q[..., k + 1] = comp[..., k] / (k + 1)
        # replace the first derivative by its accurate form
        if n > 1:
            q[..., 1] = np.atleast_1d(self.g_of_Q(r))
        return q

    def energy(self) -> float:
        return self.surface.energy_of_harmonic_map()

    def table(self, r):
        r = np.asarray(r, dtype=float)
        return np.column_stack([r, self.eval_Q(r), self.eval_Qprime(r), self.eval_Qsecond(r)])


class _Table:
    """Chebyshev-panel copy of an ODE dense output (much faster to evaluate)."""

    def __init__(self, sol, lo, hi, width=0.25, order=20):
        self.grid = PanelGrid.uniform(lo, hi, width, order)
        vals = sol(self.grid.nodes.ravel())[0].reshape(self.grid.nodes.shape)
        self.coeffs = self.grid.table(vals)

    def __call__(self, s):
        return np.atleast_1d(self.grid.evaluate(self.coeffs, s))[None, :]


def _richardson3(values, factor):
    """Eliminate two geometric error terms ``c1 q^k`` and ``c2 q^(2k)`` (ratio ``factor``)."""
    v0, v1, v2 = values
    a1 = (v1 - factor * v0) / (1 - factor)
    a2 = (v2 - factor * v1) / (1 - factor)
    f2 = factor * factor
    return (a2 - f2 * a1) / (1 - f2)


def solve_harmonic_map(surface: SurfaceProfile, s_min: float = -14.0, s_max: float = 14.0,
                       tol: float = 1e-12) -> HarmonicMap:
    """Integrate the harmonic-map equation and build tail expansions."""
    if not surface.rho_M > 1.0:
        raise InvalidProfileError("normalization Q(1)=1 infeasible: rho_M <= 1")
    if not (s_min < -2 < 2 < s_max):
        raise ValueError("need s_min < -2 and s_max > 2")
    rho_M = surface.rho_M
    rtol = min(1e-6, 0.1 * tol)
    atol = 1e-3 * rtol

    def left_rhs(s, y):
        Q = math.exp(y[0])
        return [float(surface.G(Q * Q))]

    def right_rhs(s, y):
        return [-float(surface.g_over_delta_top(math.exp(y[0])))]

    left = solve_ivp(left_rhs, (0.0, s_min - 1.0), [0.0], method="DOP853", rtol=rtol, atol=atol,
                     dense_output=True)
    right = solve_ivp(right_rhs, (0.0, s_max + 1.0), [math.log(rho_M - 1.0)], method="DOP853",
                      rtol=rtol, atol=atol, dense_output=True)
    if not (left.success and right.success):
        raise ConvergenceError("harmonic-map integration failed: " + left.message + "; " + right.message)
    left_sol, right_sol = left.sol, right.sol

    step = 1.0
    sl = s_min + step * np.arange(3)[::-1]          # s_min+2, s_min+1, s_min
    A_est = [math.exp(left_sol(s)[0] - s) for s in sl]
    A0 = _richardson3(A_est, math.exp(-2 * step))
    sr = s_max - step * np.arange(3)[::-1]          # s_max-2, s_max-1, s_max
    B_est = [math.exp(right_sol(s)[0] + s) for s in sr]
    B0 = _richardson3(B_est, math.exp(-2 * step))
    A = series.solve_scaling_ode(surface.G_coeffs(TAIL_TERMS), A0, TAIL_TERMS)
    # rho_M - Q = y B(y^2), y = 1/r, solves  y d/dy (delta) = delta G_top(delta^2)
    B = series.solve_scaling_ode(surface.G_top_coeffs(TAIL_TERMS), B0, TAIL_TERMS)
    hm = HarmonicMap(surface, s_min, s_max, tol, A0, B0, _Table(left_sol, s_min - 0.5, 0.0),
                     _Table(right_sol, 0.0, s_max + 0.5), A, B)
    _check_tails(hm, tol)
    return hm


def _check_tails(hm: HarmonicMap, tol: float) -> None:
    """Interpolant and tail series must agree over two decades at each end."""
    s = np.linspace(hm.s_min, hm.s_min + math.log(100.0), 9)
    r = np.exp(s)
    Q_int = np.exp(hm._left(s)[0])
    Q_ser = r * np.polynomial.polynomial.polyval(r * r, hm._A)
    err_l = np.max(np.abs(Q_int / Q_ser - 1.0))
    s = np.linspace(hm.s_max - math.log(100.0), hm.s_max, 9)
    y = np.exp(-s)
    D_int = np.exp(hm._right(s)[0])
    D_ser = y * np.polynomial.polynomial.polyval(y * y, hm._B)
    err_r = np.max(np.abs(D_int / D_ser - 1.0))
    log.debug("tail consistency: left %.2e right %.2e", err_l, err_r)
    if max(err_l, err_r) > max(100 * tol, 1e-9):
        raise ConvergenceError(f"tail series disagree with interpolant ({err_l:.2e}, {err_r:.2e})")
