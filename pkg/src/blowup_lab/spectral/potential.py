"""Potential of the linearized operator around the harmonic map.

In the half-density form the linearization is
``L = -d^2/dR^2 + 3/(4 R^2) + V(R)`` with ``V = -(1 - f'(Q))/R^2``.
Commuting the scaling generator through ``L`` gives
``[L, R d/dR] = 2 L + W`` with ``W = -(2 V + R V') = -f''(Q) g(Q) / R^2``,
which is bounded at the origin and decays like ``R^-4``.
"""

from __future__ import annotations

import math

import numpy as np

from .. import series
from .._panels import PanelGrid
from ..harmonic_map import HarmonicMap

FAST_RANGE = 40.0


class Potential:
    """``V``, ``V'`` and ``W`` for a harmonic map, or the free case ``V = 0``."""

    def __init__(self, hm: HarmonicMap | None = None):
        self.hm = hm
        self._fast = None

    @classmethod
    def free(cls) -> "Potential":
        return cls(None)

    @property
    def is_free(self) -> bool:
        return self.hm is None

    def _m(self, R):
        """``1 - f'(Q(R))``."""
        R = np.asarray(R, dtype=float)
        if self.hm is None:
            return np.zeros_like(R)
        return self.hm.one_minus_f1_of_Q(R)

    def _at_origin(self):
        # 1 - f'(Q) ~ -f'''(0) Q^2 / 2 and Q ~ A0 R
        return float(self.hm.surface.df(0.0, 3)) * self.hm.A0 ** 2

    def V(self, R):
        R = np.asarray(R, dtype=float)
        if self.hm is None:
            return np.zeros_like(R)
        safe = np.where(R > 0, R, 1.0)
        return np.where(R > 0, -self._m(R) / safe / safe, 0.5 * self._at_origin())

    def R2V(self, R):
        """``R^2 V``, bounded at both ends."""
        return -self._m(R)

    def dV(self, R):
        R = np.asarray(R, dtype=float)
        if self.hm is None:
            return np.zeros_like(R)
        safe = np.where(R > 0, R, 1.0)
        val = (2.0 * self._m(R) + self.hm.f2_of_Q(R) * self.hm.g_of_Q(R)) / safe ** 3
        return np.where(R > 0, val, 0.0)

    def W(self, R):
        R = np.asarray(R, dtype=float)
        if self.hm is None:
            return np.zeros_like(R)
        safe = np.where(R > 0, R, 1.0)
        return np.where(R > 0, -self.hm.f2_of_Q(R) * self.hm.g_of_Q(R) / safe / safe,
                        -self._at_origin())

    def p(self, R):
        """``3/4 + R^2 V``: the full coefficient of ``R^-2`` in ``L``."""
        return 0.75 - self._m(R)

    def p_fast(self, R):
        """``p(R)`` from a Chebyshev table in ``log R``; for hot loops such as ODE right-hand sides."""
        R = np.asarray(R, dtype=float)
        if self.hm is None:
            return np.full(R.shape, 0.75)
        if self._fast is None:
            grid = PanelGrid.uniform(-FAST_RANGE, FAST_RANGE, 0.25, 20)
            self._fast = (grid, grid.table(self.p(np.exp(grid.nodes))))
        grid, table = self._fast
        t = np.log(R)
        inside = np.abs(t) <= FAST_RANGE
        if np.all(inside):
            return grid.evaluate(table, t)
        return np.where(inside, grid.evaluate(table, np.clip(t, -FAST_RANGE, FAST_RANGE)), self.p(R))

    def p_tower(self, R, n: int) -> np.ndarray:
        """``D^m p`` for ``m < n`` with ``D = -R d/dR``; last axis is ``m``.

        ``R = inf`` is allowed and gives ``(3/4, 0, 0, ...)``.
        """
        R = np.atleast_1d(np.asarray(R, dtype=float))
        out = np.zeros(R.shape + (n,))
        out[..., 0] = 0.75
        if self.hm is None:
            return out
        fin = np.isfinite(R)
        if not np.any(fin):
            return out
        Rf = R[fin]
        out[fin, 0] = self.p(Rf)
        if n > 1:
            q = self.hm.s_taylor(Rf, n)
            tf = self.hm.surface.taylor_f1(q[..., 0], n)
            inner = q.copy()
            inner[..., 0] = 0.0
            comp = series.compose(tf, inner)
            for m in range(1, n):
                out[fin, m] = (-1) ** m * math.factorial(m) * comp[..., m]
        return out
