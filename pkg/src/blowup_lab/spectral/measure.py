"""Jost coefficient ``a(xi)``, spectral density and the ``SpectralData`` bundle.

For ``xi > 0`` the regular solution splits as ``phi = a psi+ + conj(a) psi-``
with ``psi- = conj(psi+)``.  With ``W(u, v) = u' v - u v'`` one has
``W(psi+, psi-) = 2i``, hence ``a = -(i/2) W(phi, psi-)``.  The spectral
measure of ``L`` in the ``phi``-normalization has density

    rho(xi) = 1 / (4 pi |a(xi)|^2).

(For the free operator ``|a|^2 = 2/(pi xi)`` and ``rho = xi/8``, the
Hankel-transform measure of ``2 xi^-1/2 r^1/2 J_1(r sqrt xi)``.)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError
from ..harmonic_map import HarmonicMap
from .eigenfunctions import PhiContinuation, PhiSeries
from .fundamental import FundamentalSystem
from .potential import Potential
from .symbols import PsiSymbols

log = logging.getLogger(__name__)


def wronskian(f, df, g, dg):
    return df * g - f * dg


@dataclass
class SpectralData:
    """Eigenfunctions, Jost coefficients and density on a grid of ``xi``."""

    potential: Potential
    fs: FundamentalSystem
    series: PhiSeries
    symbols: PsiSymbols
    xi: np.ndarray
    a: np.ndarray
    da: np.ndarray
    rho: np.ndarray
    r_match: np.ndarray
    r_star: np.ndarray
    r_asym: np.ndarray
    weights: np.ndarray | None = None
    q0: float = 1.0
    q_min: float = 10.0
    a_variation: np.ndarray = field(default=None, repr=False)
    quad_edges: tuple | None = None
    _cont: PhiContinuation = field(default=None, repr=False)

    @property
    def j0(self) -> int:
        return self.symbols.j0

    @property
    def n(self) -> int:
        return self.xi.size

    def phi(self, i: int, r, with_xi_derivative: bool = False):
        """``phi(r, xi_i)`` and ``d phi/dr`` (plus ``xi``-derivatives on request)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        xi = float(self.xi[i])
        out = [np.empty_like(r) for _ in range(4 if with_xi_derivative else 2)]
        near = r <= self.r_match[i]
        mid = (~near) & (r <= self.r_asym[i])
        far = r > self.r_asym[i]
        if np.any(near):
            vals = self.series.evaluate(r[near], xi, with_xi_derivative=with_xi_derivative)
            for o, v in zip(out, vals):
                o[near] = v
        if np.any(mid):
            vals = self._cont.evaluate(i, r[mid])
            for o, v in zip(out, vals):
                o[mid] = v
        if np.any(far):
            a = self.a[i]
            if with_xi_derivative:
                psi, dpsi, psi_x, dpsi_x = self.symbols.psi_plus(r[far], xi, with_xi_derivative=True)
                da = self.da[i]
                vals = (2 * (a * psi).real, 2 * (a * dpsi).real,
                        2 * (da * psi + a * psi_x).real, 2 * (da * dpsi + a * dpsi_x).real)
            else:
                psi, dpsi = self.symbols.psi_plus(r[far], xi)
                vals = (2 * (a * psi).real, 2 * (a * dpsi).real)
            for o, v in zip(out, vals):
                o[far] = v
        return tuple(out)

    def phi_values(self, r, chunk: int = 4096):
        """Matrix ``phi(r_k, xi_i)`` of shape ``(n_xi, n_r)``.

        The series terms and symbol coefficients depend on ``r`` only, so
        they are evaluated once per radius and combined for all ``xi``.
        """
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0):
            raise ValueError("radii must be non-negative")
        out = np.zeros((self.n, r.size))
        pos = np.nonzero(r > 0)[0]      # phi vanishes on the axis
        for s in range(0, pos.size, chunk):
            idx = pos[s:s + chunk]
            out[:, idx] = self._phi_block(r[idx])
        return out

    def _phi_block(self, r):
        xi = self.xi[:, None]
        out = np.zeros((self.n, r.size))
        near = r[None, :] <= self.r_match[:, None]
        far = r[None, :] > self.r_asym[:, None]
        cols = np.any(near, axis=0)
        if np.any(cols):
            rc = r[cols]
            basis = self.series._basis(rc)
            p0 = self.fs.phi0(rc)
            terms = [self.series.f(j, rc, basis)[0] / np.sqrt(rc)
                     for j in range(1, self.series.n_terms + 1)]
            acc = np.zeros((self.n, rc.size))
            for t in reversed(terms):
                acc = (acc + t) * xi
            block = out[:, cols]
            block[near[:, cols]] = (acc + p0)[near[:, cols]]
            out[:, cols] = block
        cols = np.any(far, axis=0)
        if np.any(cols):
            rc = r[cols]
            sym = self.symbols
            coef = [sym.coefficient(j, rc) for j in range(sym.j0 + 1)]
            q = rc * np.sqrt(xi)
            sigma = np.zeros(q.shape, dtype=complex)
            for c in reversed(coef):
                sigma = sigma / q + c
            vals = 2.0 * (self.a[:, None] * xi ** -0.25 * np.exp(1j * q) * sigma).real
            block = out[:, cols]
            block[far[:, cols]] = vals[far[:, cols]]
            out[:, cols] = block
        mid = ~(near | far)
        for i in np.nonzero(np.any(mid, axis=1))[0]:
            m = mid[i]
            out[i, m] = self._cont.evaluate(i, r[m])[0]
        return out

    def log_derivative_rho(self):
        """``d log rho / d log xi`` by centered differences on the grid (edges one-sided)."""
        return np.gradient(np.log(self.rho), np.log(self.xi))

    def log_derivative_rho_from_a(self):
        """Same quantity from ``rho = 1/(4 pi |a|^2)`` and the analytic ``a'``."""
        return -2.0 * self.xi * (np.conj(self.a) * self.da).real / np.abs(self.a) ** 2


def symbol_radius(symbols: PsiSymbols, xi: float, q_min: float, tol: float) -> float:
    """Smallest radius (on a geometric ladder) where the truncated symbol meets ``tol``."""
    r = max(q_min / math.sqrt(xi), symbols.r_min)
    for _ in range(200):
        if float(symbols.truncation_estimate(np.array(r), xi)) <= tol:
            return r
        r *= 1.1
    raise ConvergenceError(f"symbol truncation never reaches {tol:g} at xi={xi:g}; raise j0")


def build_spectral_data(potential: Potential, xi, weights=None, q0: float = 1.0, q_min: float = 10.0,
                        j0: int = 8, symbol_tol: float = 1e-10, n_terms: int = 14,
                        wronskian_tol: float = 1e-6, fs: FundamentalSystem | None = None,
                        series: PhiSeries | None = None, symbols: PsiSymbols | None = None,
                        batch: int = 64) -> SpectralData:
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1 or xi.size == 0 or np.any(xi <= 0) or not np.all(np.isfinite(xi)):
        raise ValueError("xi grid must be positive and finite")
    fs = fs or FundamentalSystem(potential)
    r_match = q0 / np.sqrt(xi)
    if series is None:
        series = PhiSeries(fs, n_terms=n_terms, r_max=max(10.0, 1.01 * float(r_match.max())))
    symbols = symbols or PsiSymbols(potential, j0=j0)
    r_star = np.array([max(symbol_radius(symbols, x, q_min, symbol_tol), r_m)
                       for x, r_m in zip(xi, r_match)])
    r_asym = 1.5 * r_star
    a = np.empty(xi.size, dtype=complex)
    da = np.empty(xi.size, dtype=complex)
    variation = np.empty(xi.size)
    conts = []
    order = np.argsort(r_asym * np.sqrt(xi))
    for start in range(0, xi.size, batch):
        idx = order[start:start + batch]
        x_end = float(np.max(r_asym[idx] * np.sqrt(xi[idx]))) * (1 + 1e-9)
        cont = PhiContinuation(series, xi[idx], q0, x_end)
        if np.any(cont.series_tail > 1e-13):
            raise ConvergenceError("eigenfunction series not converged at the matching radius")
        conts.append((idx, cont))
        for k, i in enumerate(idx):
            vals = []
            for r in (r_star[i], r_asym[i]):
                phi, dphi, phx, dphx = cont.evaluate(k, np.array([r]))
                psi, dpsi, psx, dpsx = symbols.psi_plus(np.array([r]), xi[i], with_xi_derivative=True)
                W = wronskian(phi, dphi, np.conj(psi), np.conj(dpsi))
                dW = wronskian(phx, dphx, np.conj(psi), np.conj(dpsi)) + \
                    wronskian(phi, dphi, np.conj(psx), np.conj(dpsx))
                vals.append((complex(-0.5j * W[0]), complex(-0.5j * dW[0])))
            a[i], da[i] = vals[0]
            variation[i] = abs(vals[1][0] - vals[0][0]) / abs(vals[0][0])
    bad = variation > wronskian_tol
    if np.any(bad):
        i = int(np.argmax(variation))
        raise ConvergenceError(
            f"Wronskian a(xi) varies by {variation[i]:.2e} between r* and 1.5 r* at xi={xi[i]:g}")
    if np.any(np.abs(a) == 0):
        raise ConvergenceError("a(xi) vanished on the grid")
    rho = 1.0 / (4.0 * math.pi * np.abs(a) ** 2)
    data = SpectralData(potential, fs, series, symbols, xi, a, da, rho, r_match, r_star, r_asym,
                        None if weights is None else np.asarray(weights, dtype=float), q0, q_min,
                        variation)
    data._cont = _ContinuationIndex(conts, xi.size)
    return data


class _ContinuationIndex:
    """Routes a global ``xi`` index to its batch."""

    def __init__(self, conts, n):
        self._where = [None] * n
        for idx, cont in conts:
            for k, i in enumerate(idx):
                self._where[i] = (cont, k)

    def evaluate(self, i, r):
        cont, k = self._where[i]
        return cont.evaluate(k, r)


def compute_a(data: SpectralData, xi: float) -> complex:
    """``a(xi)`` for a single value (builds a one-point bundle sharing the tables)."""
    one = build_spectral_data(data.potential, np.array([xi]), q0=data.q0, q_min=data.q_min,
                              fs=data.fs, series=data.series, symbols=data.symbols)
    return complex(one.a[0])


def compute_rho(data: SpectralData, xi: float) -> float:
    return 1.0 / (4.0 * math.pi * abs(compute_a(data, xi)) ** 2)


def compute_phi(data_or_potential, r, xi: float):
    """``phi(r, xi)`` at arbitrary radii for a single ``xi``."""
    if isinstance(data_or_potential, SpectralData):
        d = data_or_potential
        one = build_spectral_data(d.potential, np.array([xi]), q0=d.q0, q_min=d.q_min, fs=d.fs,
                                  series=d.series if d.series.r_max >= 1.01 / math.sqrt(xi) else None,
                                  symbols=d.symbols)
    else:
        one = build_spectral_data(data_or_potential, np.array([xi]))
    return one.phi(0, r)[0]


def compute_psi_plus(potential_or_symbols, r, xi: float, j0: int = 8, q_min: float = 10.0,
                     tol: float = 1e-10):
    """``psi+(r, xi)``; below the symbol radius the ODE is integrated inward."""
    from scipy.integrate import solve_ivp

    symbols = potential_or_symbols if isinstance(potential_or_symbols, PsiSymbols) \
        else PsiSymbols(potential_or_symbols, j0=j0)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    r_sym = symbol_radius(symbols, xi, q_min, tol)
    out = np.empty(r.shape, dtype=complex)
    ok = r >= r_sym
    if np.any(ok):
        out[ok] = symbols.psi_plus(r[ok], xi)[0]
    if np.any(~ok):
        psi, dpsi = symbols.psi_plus(np.array([r_sym]), xi)
        pot = symbols.potential

        def rhs(s, y):
            c = pot.p(np.array([s]))[0] / s ** 2 - xi
            return [y[1], c * y[0]]

        y0 = np.array([psi[0], dpsi[0]], dtype=complex)
        targets = np.sort(r[~ok])[::-1]
        sol = solve_ivp(rhs, (r_sym, float(targets[-1])), y0, method="DOP853", rtol=1e-12,
                        atol=1e-14 * abs(y0[0]), t_eval=targets)
        if not sol.success:
            raise ConvergenceError("inward continuation of psi+ failed: " + sol.message)
        lookup = dict(zip(sol.t, sol.y[0]))
        out[~ok] = [lookup[v] for v in r[~ok]]
    return out
