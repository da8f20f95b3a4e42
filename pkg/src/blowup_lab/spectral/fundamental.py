"""Zero-energy solutions of the linearized operator.

``phi0 = R^{3/2} Q'(R) = R^{1/2} g(Q)`` is the regular solution and
``theta0 = -phi0 * int_1^R phi0^-2`` the second one.  With the convention
``W(u, v) = u' v - u v'`` their Wronskian is exactly one.

The integral of ``phi0^-2`` is tabulated on Chebyshev panels in
``t = log R`` (where the integrand is ``g(Q)^-2``) and accumulated from
``R = 1`` outward in both directions.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad

from .._panels import PanelGrid
from ..errors import ResolutionError
from .potential import Potential

T_RANGE = 40.0


class FundamentalSystem:
    def __init__(self, potential: Potential, panel_width: float = 0.5, order: int = 20):
        self.potential = potential
        self.hm = potential.hm
        if self.hm is None:
            self._left = self._right = None
            return
        self._left = PanelGrid.uniform(-T_RANGE, 0.0, panel_width, order)
        self._right = PanelGrid.uniform(0.0, T_RANGE, panel_width, order)
        vals = self.hm.g_of_Q(np.exp(self._left.nodes)) ** -2
        self._cI_left = self._left.table(self._left.cumulative(vals, from_right=True))
        vals = self.hm.g_of_Q(np.exp(self._right.nodes)) ** -2
        self._cI_right = self._right.table(self._right.cumulative(vals))

    @property
    def is_free(self) -> bool:
        return self.hm is None

    def integral(self, R):
        """``int_1^R phi0(S)^-2 dS``."""
        R = np.asarray(R, dtype=float)
        if self.hm is None:
            return 0.5 * (1.0 - R ** -2.0)
        t = np.log(R)
        if np.any(np.abs(t) > T_RANGE):
            raise ResolutionError(f"R outside tabulated range exp(+-{T_RANGE:g})")
        return np.where(t <= 0, self._left.evaluate(self._cI_left, np.minimum(t, 0.0)),
                        self._right.evaluate(self._cI_right, np.maximum(t, 0.0)))

    def phi0(self, R):
        R = np.asarray(R, dtype=float)
        if self.hm is None:
            return R ** 1.5
        return np.sqrt(R) * self.hm.g_of_Q(R)

    def dphi0(self, R):
        R = np.asarray(R, dtype=float)
        if self.hm is None:
            return 1.5 * np.sqrt(R)
        return self.hm.g_of_Q(R) * (0.5 + self.hm.g1_of_Q(R)) / np.sqrt(R)

    def ddphi0(self, R):
        """From the equation: ``phi0'' = (3/(4R^2) + V) phi0``."""
        R = np.asarray(R, dtype=float)
        return (self.potential.p(R) / R ** 2) * self.phi0(R)

    def theta0(self, R):
        R = np.asarray(R, dtype=float)
        if self.hm is None:
            return 0.5 * (R ** -0.5 - R ** 1.5)
        return -self.phi0(R) * self.integral(R)

    def dtheta0(self, R):
        R = np.asarray(R, dtype=float)
        if self.hm is None:
            return -0.25 * R ** -1.5 - 0.75 * R ** 0.5
        return -self.dphi0(R) * self.integral(R) - 1.0 / self.phi0(R)

    def dtheta0_table(self, R):
        """``theta0'`` by spectral differentiation of the tabulated ``theta0``.

        Independent of the closed-form derivative; used to validate the table.
        """
        R = np.atleast_1d(np.asarray(R, dtype=float))
        if self.hm is None:
            return self.dtheta0(R)
        out = np.empty_like(R)
        t = np.log(R)
        for grid, sel in ((self._left, t <= 0), (self._right, t > 0)):
            if not np.any(sel):
                continue
            th = -self.phi0(np.exp(grid.nodes)) * self.integral(np.exp(grid.nodes))
            dth_dt = grid.derivative(th)
            out[sel] = grid.evaluate(grid.table(dth_dt), t[sel]) / R[sel]
        return out

    def theta_green(self, R):
        """Second solution used inside Green's functions.

        Any solution with unit Wronskian against ``phi0`` gives the same
        Green's function; for the free operator the one without a ``phi0``
        component, ``R^-1/2 / 2``, avoids cancellation at large ``R``.
        """
        R = np.asarray(R, dtype=float)
        if self.hm is None:
            return 0.5 / np.sqrt(R)
        return self.theta0(R)

    def dtheta_green(self, R):
        R = np.asarray(R, dtype=float)
        if self.hm is None:
            return -0.25 * R ** -1.5
        return self.dtheta0(R)

    def wronskian(self, R, table: bool = True):
        """``W(phi0, theta0) = phi0' theta0 - phi0 theta0'``."""
        dth = self.dtheta0_table(R) if table else self.dtheta0(R)
        return self.dphi0(R) * self.theta0(R) - self.phi0(R) * dth

    def theta0_via_chi(self, R):
        """Second solution through ``int_{Q(1)}^{Q(R)} g^-3 d rho`` (independent path)."""
        R = np.atleast_1d(np.asarray(R, dtype=float))
        if self.hm is None:
            return self.theta0(R)
        surf = self.hm.surface
        out = np.empty_like(R)
        Q1 = float(self.hm.eval_Q(1.0))
        for i, Ri in enumerate(R):
            Qi = float(self.hm.eval_Q(Ri))
            val, _ = quad(lambda rho: float(surf.g(rho)) ** -3, Q1, Qi, epsabs=0.0, epsrel=1e-13,
                          limit=400)
            out[i] = -float(self.phi0(Ri)) * val
        return out
