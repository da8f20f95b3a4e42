"""Outgoing solutions ``psi+(r, xi)`` through their large-``r`` symbol.

Writing ``psi+ = xi^-1/4 exp(i q) sigma`` with ``q = r sqrt(xi)`` and
``sigma = sum_j q^-j psi_j(r)``, the coefficients obey (with ``y = 1/r``,
``D = y d/dy = -r d/dr`` and ``p = 3/4 + r^2 V``)

    psi_0 = 1,
    psi_j(y) = (i/2)[-(j-1) psi_{j-1} - D psi_{j-1}](y)
               + (i/2) int_0^1 t^(j-1) (p psi_{j-1})(y t) dt.

Each ``psi_j`` is tabulated on Chebyshev panels in ``y`` together with
the ``D``-derivatives the next levels need; ``D^m p`` comes from Taylor
expansion of the harmonic map in ``log r``.  For the free operator
``p = 3/4`` and the recursion reproduces the Hankel asymptotic series
(``psi_1 = 3i/8``, ``psi_2 = 15/128``).
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import comb

from .._panels import PanelGrid
from .potential import Potential

DEFAULT_EDGES = (0.0, 0.125, 0.25, 0.5, 1.0, 2.0)


class PsiSymbols:
    def __init__(self, potential: Potential, j0: int = 8, edges=DEFAULT_EDGES, order: int = 24,
                 n_quad: int = 48):
        self.potential = potential
        self.j0 = int(j0)
        self.grid = PanelGrid(np.asarray(edges, dtype=float), order)
        self.r_min = 1.0 / self.grid.hi
        K = self.j0 + 1
        y = self.grid.nodes                              # (P, n)
        tq, wq = leggauss(n_quad)
        tq = 0.5 * (tq + 1.0)
        wq = 0.5 * wq
        yt = y[..., None] * tq                           # (P, n, M)
        with np.errstate(divide="ignore"):
            R = np.where(yt > 0, 1.0 / yt, np.inf)
        ptow = potential.p_tower(R.ravel(), K + 1).reshape(yt.shape + (K + 1,))

        # D^k psi_j at nodes, for k = 0..K-j ; tables[j][k] shape (P, n)
        tables = [[np.ones(y.shape, dtype=complex)] + [np.zeros(y.shape, dtype=complex)] * K]
        for j in range(1, self.j0 + 1):
            prev = tables[j - 1]
            kmax = K - j
            # interpolate D^k psi_{j-1} at y t for k <= kmax
            prev_at = []
            for k in range(kmax + 1):
                c = self.grid.table(prev[k])
                vals = np.empty(yt.shape, dtype=complex)
                vals[...] = self._eval_panels(c, yt)
                prev_at.append(vals)
            cur = []
            for k in range(kmax + 1):
                integrand = np.zeros(yt.shape, dtype=complex)
                for m in range(k + 1):
                    integrand += comb(k, m, exact=True) * ptow[..., m] * prev_at[k - m]
                integral = np.sum(integrand * (wq * tq ** (j - 1)), axis=-1)
                local = -(j - 1) * prev[k] - prev[k + 1]
                cur.append(0.5j * (local + integral))
            tables.append(cur)
        self._tables = tables
        self._c = [self.grid.table(tables[j][0]) for j in range(self.j0 + 1)]
        self._cD = [self.grid.table(tables[j][1]) for j in range(self.j0 + 1)]

    def _eval_panels(self, coeffs, y):
        flat = y.ravel()
        re = self.grid.evaluate(coeffs.real, flat)
        im = self.grid.evaluate(coeffs.imag, flat)
        return (re + 1j * im).reshape(y.shape)

    def coefficient(self, j: int, r):
        """``psi_j`` at radius ``r`` (``r = inf`` allowed)."""
        r = np.asarray(r, dtype=float)
        return self._eval_panels(self._c[j], 1.0 / r)

    def D_coefficient(self, j: int, r):
        r = np.asarray(r, dtype=float)
        return self._eval_panels(self._cD[j], 1.0 / r)

    def _sums(self, r, xi, powers=(0, 1, 2)):
        r = np.asarray(r, dtype=float)
        q = r * math.sqrt(xi)
        if np.any(r < self.r_min * (1 - 1e-12)):
            raise ValueError(f"symbol tables start at r = {self.r_min:g}")
        S = {k: np.zeros(r.shape, dtype=complex) for k in powers}
        T = {k: np.zeros(r.shape, dtype=complex) for k in powers}
        qinv = 1.0 / q
        qp = np.ones_like(q)
        for j in range(self.j0 + 1):
            pj = self.coefficient(j, r)
            dj = self.D_coefficient(j, r)
            for k in powers:
                S[k] += j ** k * qp * pj
                T[k] += j ** k * qp * dj
            qp = qp * qinv
        return q, S, T

    def truncation_estimate(self, r, xi):
        """Size of the first omitted term relative to ``|sigma|``."""
        r = np.asarray(r, dtype=float)
        q = r * math.sqrt(xi)
        last = np.abs(self.coefficient(self.j0, r))
        return 0.5 * self.j0 * last * q ** (-self.j0 - 1.0)

    def psi_plus(self, r, xi, with_xi_derivative: bool = False):
        """``psi+`` and ``d psi+/dr`` (optionally also their ``xi`` derivatives)."""
        r = np.asarray(r, dtype=float)
        sx = math.sqrt(xi)
        q, S, T = self._sums(r, xi)
        E = xi ** -0.25 * np.exp(1j * q)
        psi = E * S[0]
        bracket = 1j * sx * S[0] - (S[1] + T[0]) / r
        dpsi = E * bracket
        if not with_xi_derivative:
            return psi, dpsi
        dE = -0.25 / xi + 0.5j * r / sx
        psi_xi = E * (dE * S[0] - 0.5 * S[1] / xi)
        dbracket = 0.5j / sx * S[0] - 0.5j * S[1] / sx + 0.5 * (S[2] + T[1]) / (xi * r)
        dpsi_xi = E * (dE * bracket + dbracket)
        return psi, dpsi, psi_xi, dpsi_xi
