"""Generalized eigenfunctions ``phi(r, xi)`` regular at the origin.

``phi`` solves ``(L - xi) phi = 0`` with ``phi ~ phi0`` at ``r = 0``.  For
``r^2 xi`` small it is the convergent series

    phi(r, xi) = sum_j xi^j r^-1/2 f_j(r),    f_0 = r^1/2 phi0,

whose terms obey the Volterra recursion

    f_j(r) = -r^1/2 [phi0(r) A_j(r) - theta(r) B_j(r)],
    A_j = int_0^r theta s^-1/2 f_{j-1} ds,   B_j = int_0^r phi0 s^-1/2 f_{j-1} ds,

with ``theta`` any second solution of unit Wronskian.  ``f_j = r^{2j} phi_j(r^2)``
and every ``phi_j`` vanishes at ``u = 0``.  The integrals are tabulated on
Chebyshev panels in ``log r``.

Past the matching radius ``r^2 xi = q0^2`` the series value and
derivative seed an outward ODE integration in ``x = r sqrt(xi)``, carried
out for a whole batch of ``xi`` at once together with the variational
equation for ``d phi / d xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .._panels import PanelGrid
from ..errors import ConvergenceError
from .fundamental import FundamentalSystem


# Power-law envelopes of A_j and B_j, so that the tabulated ratios vary slowly
# and interpolation keeps relative accuracy across many decades of r.
def _scale_A(r, j):
    return r ** (2 * j) * (1.0 + np.log1p(r))


def _scale_B(r, j):
    return r ** (2 * j + 2) / (1.0 + r ** 4) * (1.0 + np.log1p(r))


class PhiSeries:
    """Tables of the Volterra iterates ``f_j`` for ``j = 0..n_terms``."""

    def __init__(self, fs: FundamentalSystem, n_terms: int = 14, r_min: float = 1e-5,
                 r_max: float = 1e5, panel_width: float = 0.5, order: int = 20):
        self.fs = fs
        self.n_terms = int(n_terms)
        self.r_min, self.r_max = float(r_min), float(r_max)
        self.grid = PanelGrid.uniform(math.log(r_min), math.log(r_max), panel_width, order, anchor=0.0)
        r = np.exp(self.grid.nodes)
        sq = np.sqrt(r)
        phi0 = fs.phi0(r)
        th = fs.theta_green(r)
        self._cA, self._cB = [None], [None]
        f_prev = sq * phi0
        self.f_nodes = [f_prev]
        for j in range(1, self.n_terms + 1):
            iA = th / sq * f_prev * r
            iB = phi0 / sq * f_prev * r
            A = self.grid.cumulative(iA, start=float(iA[0, 0]) / (2 * j))
            B = self.grid.cumulative(iB, start=float(iB[0, 0]) / (2 * j + 2))
            f_prev = -sq * (phi0 * A - th * B)
            if not np.all(np.isfinite(f_prev)):
                raise ConvergenceError(f"Volterra iterate {j} is not finite")
            self.f_nodes.append(f_prev)
            self._cA.append(self.grid.table(A / _scale_A(r, j)))
            self._cB.append(self.grid.table(B / _scale_B(r, j)))

    def _AB(self, j, r):
        t = np.log(r)
        return (self.grid.evaluate(self._cA[j], t) * _scale_A(r, j),
                self.grid.evaluate(self._cB[j], t) * _scale_B(r, j))

    def _basis(self, r):
        fs = self.fs
        lo = r < self.r_min
        rr = np.where(lo, self.r_min, r)
        return (r, lo, rr, fs.phi0(rr), fs.theta_green(rr), fs.dphi0(rr), fs.dtheta_green(rr))

    def f(self, j: int, r, basis=None):
        """``f_j(r)`` and ``f_j'(r)``."""
        r = np.asarray(r, dtype=float)
        fs = self.fs
        if j == 0:
            sq = np.sqrt(r)
            return sq * fs.phi0(r), 0.5 * fs.phi0(r) / sq + sq * fs.dphi0(r)
        if np.any(r > self.r_max * (1 + 1e-12)):
            raise ValueError(f"r beyond Volterra table range {self.r_max:g}")
        _, lo, rr, p0, th, dp0, dth = basis if basis is not None else self._basis(r)
        A, B = self._AB(j, rr)
        sq = np.sqrt(rr)
        core = p0 * A - th * B
        dcore = dp0 * A - dth * B
        val = -sq * core
        der = -0.5 * core / sq - sq * dcore
        if np.any(lo):
            ratio = r / self.r_min
            p = 2 * j + 2
            val = np.where(lo, val * ratio ** p, val)
            der = np.where(lo, val * p / np.where(lo, r, 1.0), der)
        return val, der

    def phi_j(self, j: int, u):
        """``phi_j(u) = f_j(sqrt u) / u^j``; the value at ``u = 0`` is a fitted limit."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.empty_like(u)
        pos = u > 0
        if np.any(pos):
            r = np.sqrt(u[pos])
            out[pos] = self.f(j, r)[0] / u[pos] ** j
        if np.any(~pos):
            out[~pos] = self.phi_j_at_zero(j)
        return out

    def phi_j_at_zero(self, j: int) -> float:
        """Quadratic extrapolation of ``phi_j(u)`` from the first table nodes to ``u = 0``."""
        r = np.exp(self.grid.nodes[0, :4])
        u = r * r
        vals = self.f_nodes[j][0, :4] / u ** j if j else self.f_nodes[0][0, :4]
        coef = np.polyfit(u, vals, 2)
        return float(coef[-1])

    def evaluate(self, r, xi, n_terms: int | None = None, with_xi_derivative: bool = False):
        """Series value of ``phi`` and ``d phi/dr`` (and their ``xi`` derivatives).

        ``xi`` is a scalar or an array broadcasting against ``r``.
        """
        r = np.asarray(r, dtype=float)
        xi = np.asarray(xi, dtype=float)
        n = self.n_terms if n_terms is None else n_terms
        sq = np.sqrt(r)
        basis = self._basis(r)
        _, lo, _, p0, _, dp0, _ = basis
        if np.any(lo):
            p0, dp0 = self.fs.phi0(r), self.fs.dphi0(r)
        phi = np.broadcast_to(p0, np.broadcast_shapes(r.shape, xi.shape)).astype(float)
        dphi = np.broadcast_to(dp0, phi.shape).astype(float)
        dxi = np.zeros_like(phi)
        dxi_r = np.zeros_like(phi)
        last = np.zeros_like(phi)
        for j in range(1, n + 1):
            fj, dfj = self.f(j, r, basis)
            term = fj / sq
            dterm = dfj / sq - 0.5 * fj / (r * sq)
            phi = phi + xi ** j * term
            dphi = dphi + xi ** j * dterm
            if with_xi_derivative:
                dxi = dxi + j * xi ** (j - 1) * term
                dxi_r = dxi_r + j * xi ** (j - 1) * dterm
            last = xi ** j * term
        if with_xi_derivative:
            return phi, dphi, dxi, dxi_r, last
        return phi, dphi, last


@dataclass
class VolterraBound:
    """Fitted ``|phi_j(u)| <= C2 C^j / (j-1)! log(1+u)`` over the sampled ``u``."""
    C: float
    C2: float
    sup_ratios: np.ndarray      # sup_u |phi_j(u)| / log(1+u), j = 1..j_max
    u_range: tuple


def fit_volterra_bound(series: PhiSeries, j_max: int = 8, n_samples: int = 2000) -> VolterraBound:
    """Fit the factorial bound on the whole tabulated range of ``u = r^2``.

    ``C`` is the geometric growth rate of ``(j-1)! sup_u |phi_j| / log(1+u)`` from a
    least-squares line in ``log``; ``C2`` is then the smallest constant making the
    bound hold for every ``j``.
    """
    if j_max > series.n_terms:
        raise ValueError(f"only {series.n_terms} iterates are tabulated")
    u = np.geomspace(series.r_min ** 2, series.r_max ** 2, n_samples)
    log1 = np.log1p(u)
    j = np.arange(1, j_max + 1)
    sup = np.array([np.max(np.abs(series.phi_j(k, u)) / log1) for k in j])
    a = sup * np.array([math.factorial(k - 1) for k in j])
    slope = np.polyfit(j, np.log(a), 1)[0]
    C = math.exp(slope)
    C2 = float(np.max(a / C ** j))
    return VolterraBound(C, C2, sup, (float(u[0]), float(u[-1])))


def first_iterate_lower_constant(series: PhiSeries, u_lo: float = 1e2, u_hi: float = 1e4,
                                 n_samples: int = 200) -> float:
    """``min |f_1(sqrt u)| / (u log u)`` on ``[u_lo, u_hi]`` (``u_lo > 1``)."""
    u = np.geomspace(u_lo, u_hi, n_samples)
    return float(np.min(np.abs(series.f(1, np.sqrt(u))[0]) / (u * np.log(u))))


class PhiContinuation:
    """Outward ODE continuation of ``phi`` for a batch of ``xi`` values.

    Works in ``x = r sqrt(xi)`` so that every member of the batch lives on
    the same interval ``[q0, x_end]``.  State per ``xi``:
    ``(phi, d phi/dx, d phi/d xi, d/dx d phi/d xi)``.
    """

    def __init__(self, series: PhiSeries, xi, q0: float, x_end: float, rtol: float = 1e-12):
        self.series = series
        self.fs = series.fs
        self.xi = np.asarray(xi, dtype=float)
        self.q0 = float(q0)
        self.x_end = float(x_end)
        sx = np.sqrt(self.xi)
        self._sx = sx
        n = self.xi.size
        r_m = q0 / sx
        phi, dphi, dxi, dxi_r, last = series.evaluate(r_m, self.xi, with_xi_derivative=True)
        y0 = np.concatenate([phi, dphi / sx, dxi, dxi_r / sx])
        self.series_tail = np.abs(last) / np.maximum(np.abs(phi), 1e-300)
        self._scale = np.maximum(np.abs(y0), 1e-300)
        potential = self.fs.potential
        inv_xi = 1.0 / self.xi

        def rhs(x, y):
            p = potential.p_fast(x / sx)
            c = p / (x * x) - 1.0
            phi, dphi, chi, dchi = y[:n], y[n:2 * n], y[2 * n:3 * n], y[3 * n:]
            return np.concatenate([dphi, c * phi, dchi, c * chi - phi * inv_xi])

        atol = 1e-3 * rtol * np.concatenate([np.maximum(self._scale[:n], self._scale[n:2 * n])] * 2
                                            + [np.maximum(self._scale[2 * n:3 * n], self._scale[3 * n:])] * 2)
        sol = solve_ivp(rhs, (self.q0, self.x_end), y0, method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True)
        if not sol.success:
            raise ConvergenceError("eigenfunction continuation failed: " + sol.message)
        self._sol = sol.sol
        self.n = n

    def evaluate(self, i: int, r):
        """``(phi, phi_r, phi_xi, phi_xi_r)`` for batch member ``i`` at radii ``r``."""
        r = np.asarray(r, dtype=float)
        x = r * self._sx[i]
        if np.any(x < self.q0 * (1 - 1e-12)) or np.any(x > self.x_end * (1 + 1e-12)):
            raise ValueError("radius outside the continuation interval")
        n = self.n
        y = self._sol(np.clip(x.ravel(), self.q0, self.x_end))
        sx = self._sx[i]
        out = (y[i], y[n + i] * sx, y[2 * n + i], y[3 * n + i] * sx)
        return tuple(o.reshape(r.shape) for o in out)
