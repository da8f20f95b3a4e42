"""Self-similar blow-up ansatz, its error, and the first corrector.

The ansatz is ``u0(t, r) = Q(lambda(t) r)`` with ``lambda = t^(-1-nu)``.
Writing ``R = lambda r``, the error ``t^2 e0`` depends on ``R`` only:

    t^2 e0 = -(1+nu) g(Q) [1 + (1+nu) g'(Q)].

The first corrector ``v1 = t^(2 nu) w(R)`` solves the linearized
equation ``(d_R^2 + R^-1 d_R - f'(Q)/R^2) w = -t^2 e0`` with vanishing
data at ``R = 0``.  Near the axis ``w`` is an odd power series; further
out it is given by variation of parameters with the zero-energy solutions
``phi0``, ``theta0`` of the half-density operator.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import series
from ._panels import PanelGrid
from .errors import ConvergenceError, InvalidProfileError
from .harmonic_map import HarmonicMap
from .spectral.fundamental import FundamentalSystem
from .spectral.potential import Potential

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlowupFrame:
    """Cone coordinates attached to the blow-up rate ``lambda(t) = t^(-1-nu)``."""

    nu: float
    t0: float = 1.0

    def __post_init__(self):
        if not self.nu > 0.5:
            raise InvalidProfileError("nu must exceed 1/2")
        if not self.t0 > 0:
            raise InvalidProfileError("t0 must be positive")

    def lam(self, t):
        return np.asarray(t, dtype=float) ** (-1.0 - self.nu)

    def R(self, t, r):
        return self.lam(t) * np.asarray(r, dtype=float)

    def a(self, t, r):
        return np.asarray(r, dtype=float) / np.asarray(t, dtype=float)

    def b2(self, t):
        """``(t lambda)^-2 = t^(2 nu)``."""
        return np.asarray(t, dtype=float) ** (2.0 * self.nu)

    def b1(self, t, r):
        return self.b2(t) * np.log(2.0 + self.R(t, r) ** 2)

    def b(self, t, r):
        return self.b2(t) * np.log(2.0 + self.R(t, r) ** 2) ** 2

    def tau(self, t):
        return np.asarray(t, dtype=float) ** (-self.nu) / self.nu

    def cone_radius_R(self, t):
        """Light-cone radius ``r = t`` in the ``R`` variable: ``t lambda = t^-nu``."""
        return np.asarray(t, dtype=float) ** (-self.nu)


def scaled_e0(nu: float, hm: HarmonicMap, R):
    """``t^2 e0`` as a function of ``R``."""
    return -(1.0 + nu) * hm.g_of_Q(R) * (1.0 + (1.0 + nu) * hm.g1_of_Q(R))


def eval_u0(frame: BlowupFrame, hm: HarmonicMap, t, r):
    return hm.eval_Q(frame.R(t, r))


def eval_e0(frame: BlowupFrame, hm: HarmonicMap, t, r):
    """``e0 = -(1/t^2)[(1+nu)(2+nu) R Q' + (1+nu)^2 R^2 Q'']``."""
    nu = frame.nu
    R = frame.R(t, r)
    RQp = R * hm.eval_Qprime(R)
    R2Qpp = R * R * hm.eval_Qsecond(R)
    return -((1 + nu) * (2 + nu) * RQp + (1 + nu) ** 2 * R2Qpp) / np.asarray(t, dtype=float) ** 2


# ---------------------------------------------------------------------------
# profile evaluators: (u, u_t, u_r, u_tt, u_rr)
# ---------------------------------------------------------------------------

class StaticEvaluator:
    """The harmonic map itself, a static solution."""

    def __init__(self, hm: HarmonicMap):
        self.hm = hm

    def derivs(self, t, r):
        r = np.asarray(r, dtype=float)
        z = np.zeros_like(r)
        return (self.hm.eval_Q(r), z, self.hm.eval_Qprime(r), z, self.hm.eval_Qsecond(r))


class U0Evaluator:
    def __init__(self, frame: BlowupFrame, hm: HarmonicMap):
        self.frame, self.hm = frame, hm

    def derivs(self, t, r):
        nu = self.frame.nu
        t = np.asarray(t, dtype=float)
        lam = self.frame.lam(t)
        R = lam * np.asarray(r, dtype=float)
        g = self.hm.g_of_Q(R)
        u = self.hm.eval_Q(R)
        u_t = -(1 + nu) * g / t
        u_tt = (1 + nu) * g * (1 + (1 + nu) * self.hm.g1_of_Q(R)) / t ** 2
        return u, u_t, lam * self.hm.eval_Qprime(R), u_tt, lam ** 2 * self.hm.eval_Qsecond(R)


class U1Evaluator:
    """``u1 = u0 + t^(2 nu) w(R)`` with closed-form derivatives."""

    def __init__(self, frame: BlowupFrame, hm: HarmonicMap, corrector: "Corrector"):
        self.frame, self.hm, self.corr = frame, hm, corrector
        self._u0 = U0Evaluator(frame, hm)

    def corrector_derivs(self, t, r):
        nu = self.frame.nu
        t = np.asarray(t, dtype=float)
        lam = self.frame.lam(t)
        R = lam * np.asarray(r, dtype=float)
        w, w1, w2 = self.corr.eval(R)
        Dw = R * w1
        DDw = R * w1 + R * R * w2
        G = 2 * nu * w - (1 + nu) * Dw
        DG = 2 * nu * Dw - (1 + nu) * DDw
        b2 = t ** (2 * nu)
        v = b2 * w
        v_t = b2 / t * G
        v_tt = b2 / t ** 2 * ((2 * nu - 1) * G - (1 + nu) * DG)
        return v, v_t, b2 * lam * w1, v_tt, b2 * lam ** 2 * w2

    def derivs(self, t, r):
        a = self._u0.derivs(t, r)
        b = self.corrector_derivs(t, r)
        return tuple(x + y for x, y in zip(a, b))


def residual(evaluator, surface, t, r):
    """Pointwise wave-map error ``-u_tt + u_rr + u_r/r - f(u)/r^2``.

    On the axis the profiles are odd in ``r``; the spatial part then
    vanishes in the limit and only ``-u_tt(t, 0)`` remains.
    """
    r = np.asarray(r, dtype=float)
    safe = np.where(r > 0, r, 1.0)
    u, u_t, u_r, u_tt, u_rr = evaluator.derivs(t, safe)
    spatial = u_rr + u_r / safe - surface.f(u) / safe / safe
    _, _, _, u_tt0, _ = evaluator.derivs(t, np.zeros_like(r))
    return np.where(r > 0, -u_tt + spatial, -u_tt0)


# ---------------------------------------------------------------------------
# corrector
# ---------------------------------------------------------------------------

SERIES_TERMS = 64


def _axis_series(hm: HarmonicMap, nu: float, n: int):
    """Coefficients in ``x = R^2`` of ``h/R`` (``h = -t^2 e0``) and of ``f'(Q) - 1``."""
    surf = hm.surface
    Gc = surf.G_coeffs(n + 2)
    Qc = series.solve_scaling_ode(Gc, hm.A0, n)            # Q = R * Qc(x)
    u = np.concatenate([[0.0], series.mul(Qc, Qc)[:-1]])   # Q^2 = x Qc^2
    k = np.arange(Gc.size)
    Gu = series.compose(Gc, u)
    dG = np.append(Gc[1:] * k[1:], 0.0)                    # G'
    ddG = np.append(dG[1:] * k[1:], 0.0)                   # G''
    g_over_R = series.mul(Qc, Gu)
    g1 = series.compose(Gc * (2 * k + 1), u)               # G(x) + 2x G'(x) at x = Q^2
    # f' = g'^2 + g g'',  g g'' = Q^2 G(Q^2) (6 G' + 4 Q^2 G'')(Q^2)
    inner = series.compose(6 * dG, u) + series.mul(4 * u, series.compose(ddG, u))
    f1 = series.mul(g1, g1) + series.mul(series.mul(u, Gu), inner)
    H = (1 + nu) * (g_over_R + (1 + nu) * series.mul(g_over_R, g1))
    F1 = f1.copy()
    F1[0] -= 1.0
    return H, F1


def _corrector_series(H: np.ndarray, F1: np.ndarray, n: int) -> np.ndarray:
    """``V_k`` with ``w = sum_{k>=1} V_k R^(2k+1)``; index 0 unused."""
    V = np.zeros(n)
    for k in range(1, n):
        s = H[k - 1] + sum(F1[l] * V[k - l] for l in range(1, k))
        V[k] = s / ((2 * k + 1) ** 2 - 1)
    return V


@dataclass
class Corrector:
    """``w(R)`` with ``v1 = t^(2 nu) w(R)``."""

    nu: float
    hm: HarmonicMap
    fs: FundamentalSystem
    V: np.ndarray
    R_match: float
    R_max: float
    grid: PanelGrid = field(repr=False)
    _cA: np.ndarray = field(repr=False)
    _cB: np.ndarray = field(repr=False)
    _cw: np.ndarray = field(repr=False)
    w_nodes: np.ndarray = field(repr=False)
    overlap_error: float = 0.0

    @property
    def limit_w_over_R3(self) -> float:
        return float(self.V[1])

    def eval_series(self, R):
        R = np.asarray(R, dtype=float)
        x = R * R
        c = self.V[1:]
        k = np.arange(1, self.V.size)
        P = np.polynomial.polynomial.polyval(x, c)
        P1 = np.polynomial.polynomial.polyval(x, c * (2 * k + 1))
        P2 = np.polynomial.polynomial.polyval(x, c * (2 * k + 1) * (2 * k))
        return R ** 3 * P, R ** 2 * P1, R * P2

    def _AB(self, R):
        t = np.log(R)
        sA = self.grid.evaluate(self._cA, t)
        sB = self.grid.evaluate(self._cB, t)
        return sA * _scale_A(R), sB * _scale_B(R)

    def eval_vp(self, R):
        R = np.asarray(R, dtype=float)
        A, B = self._AB(R)
        fs = self.fs
        y = fs.phi0(R) * A - fs.theta0(R) * B
        y1 = fs.dphi0(R) * A - fs.dtheta0(R) * B
        h = -scaled_e0(self.nu, self.hm, R)
        y2 = self.fs.potential.p(R) / R ** 2 * y + np.sqrt(R) * h
        sq = np.sqrt(R)
        w = y / sq
        w1 = y1 / sq - 0.5 * y / (R * sq)
        w2 = y2 / sq - y1 / (R * sq) + 0.75 * y / (R * R * sq)
        return w, w1, w2

    def eval(self, R):
        """``(w, w', w'')`` at ``R``."""
        R = np.asarray(R, dtype=float)
        if np.any(R > self.R_max * (1 + 1e-12)):
            raise ValueError(f"R beyond corrector range R_max={self.R_max:g}")
        inner = R <= self.R_match
        out = [np.empty_like(R) for _ in range(3)]
        if np.any(inner):
            for o, v in zip(out, self.eval_series(R[inner])):
                o[inner] = v
        if np.any(~inner):
            for o, v in zip(out, self.eval_vp(R[~inner])):
                o[~inner] = v
        return tuple(out)

    def w(self, R):
        return self.eval(R)[0]

    def residual(self, R):
        """``L w + t^2 e0`` with ``L w`` from derivatives independent of the construction.

        On the series side the derivatives are term-wise; beyond ``R_match``
        ``w`` is differentiated spectrally from its nodal table in ``log R``.
        """
        R = np.asarray(R, dtype=float)
        f1 = 1.0 - self.hm.one_minus_f1_of_Q(R)
        e0 = scaled_e0(self.nu, self.hm, R)
        out = np.empty_like(R)
        inner = R <= self.R_match
        if np.any(inner):
            Ri = R[inner]
            w, w1, w2 = self.eval_series(Ri)
            out[inner] = w2 + w1 / Ri - f1[inner] * w / Ri ** 2 + e0[inner]
        if np.any(~inner):
            Ro = R[~inner]
            t = np.log(Ro)
            wt = self.grid.evaluate(self._cw, t)
            d2 = self.grid.derivative(self.grid.derivative(self.w_nodes))
            wtt = self.grid.evaluate(self.grid.table(d2), t)
            out[~inner] = (wtt - f1[~inner] * wt) / Ro ** 2 + e0[~inner]
        return out

    def table(self, R):
        w, w1, w2 = self.eval(R)
        return np.column_stack([R, w, w1, w2])


def _scale_A(R):
    return R * R * (1.0 + np.log1p(R))


def _scale_B(R):
    R2 = R * R
    return R2 * R2 / (1.0 + R2) * (1.0 + np.log1p(R))


def solve_corrector(frame: BlowupFrame, hm: HarmonicMap, fs: FundamentalSystem | None = None,
                    R_max: float = 1e6, tol: float = 1e-10, R_match: float = 1.0,
                    R_min: float = 1e-6, panel_width: float = 0.5, order: int = 20) -> Corrector:
    """Solve the corrector equation with vanishing data at the axis."""
    nu = frame.nu
    if fs is None:
        fs = FundamentalSystem(Potential(hm))
    if not (R_min < R_match < R_max):
        raise ValueError("need R_min < R_match < R_max")
    H, F1 = _axis_series(hm, nu, SERIES_TERMS)
    V = _corrector_series(H, F1, SERIES_TERMS)

    grid = PanelGrid.uniform(math.log(R_min), math.log(R_max), panel_width, order,
                             anchor=math.log(R_match))
    Rn = np.exp(grid.nodes)
    h = -scaled_e0(nu, hm, Rn)
    phi0, theta0 = fs.phi0(Rn), fs.theta0(Rn)
    # integrands in t = log R:  d/dt = R d/dR
    iA = theta0 * np.sqrt(Rn) * h * Rn
    iB = phi0 * np.sqrt(Rn) * h * Rn
    # power-law start below R_min: iA ~ R^2 (in t), iB ~ R^4
    A = grid.cumulative(iA, start=float(iA[0, 0]) / 2.0)
    B = grid.cumulative(iB, start=float(iB[0, 0]) / 4.0)
    y = phi0 * A - theta0 * B
    w_nodes = y / np.sqrt(Rn)
    corr = Corrector(nu, hm, fs, V, R_match, R_max, grid,
                     grid.table(A / _scale_A(Rn)), grid.table(B / _scale_B(Rn)),
                     grid.table(w_nodes), w_nodes)
    # overlap check: half a decade below R_match
    Rw = np.geomspace(R_match / math.sqrt(10.0), R_match, 11)
    ws = corr.eval_series(Rw)[0]
    wv = corr.eval_vp(Rw)[0]
    err = float(np.max(np.abs(ws - wv) / np.maximum(np.abs(ws), 1e-300)))
    corr.overlap_error = err
    log.debug("corrector overlap mismatch %.3e", err)
    if not np.all(np.isfinite(w_nodes)):
        raise ConvergenceError("corrector quadrature produced non-finite values")
    if err > 100 * tol:
        raise ConvergenceError(f"corrector series and quadrature disagree at R_match: {err:.3e}")
    return corr


def e1_scaled(frame: BlowupFrame, hm: HarmonicMap, corr: Corrector, t, r):
    """``t^2 e1`` for ``u1 = u0 + v1``, arranged so that no large terms cancel.

    Algebraically this is the residual of ``u1``: the harmonic-map terms
    are removed using ``r Q' = g(Q)``, the linear part is ``L w + t^2 e0``,
    and the nonlinear remainder ``f(Q+v) - f(Q) - f'(Q) v`` is summed from
    its Taylor series when ``v`` is small.
    """
    nu = frame.nu
    t = float(t)
    R = frame.R(t, r)
    w, w1, w2 = corr.eval(R)
    Dw = R * w1
    DDw = R * w1 + R * R * w2
    G = 2 * nu * w - (1 + nu) * Dw
    DG = 2 * nu * Dw - (1 + nu) * DDw
    b2 = t ** (2 * nu)
    lin = w2 + w1 / np.where(R > 0, R, 1.0) - (1.0 - hm.one_minus_f1_of_Q(R)) * w / np.where(R > 0, R, 1.0) ** 2
    lin = np.where(R > 0, lin + scaled_e0(nu, hm, R), 0.0)
    time_part = b2 * ((2 * nu - 1) * G - (1 + nu) * DG)
    v = b2 * w
    N = _nonlinear_remainder(hm, R, v)
    safeR = np.where(R > 0, R, 1.0)
    return np.where(R > 0, lin - time_part - N / (b2 * safeR ** 2), 0.0)


def _nonlinear_remainder(hm: HarmonicMap, R, v, terms: int = 8):
    """``f(Q+v) - f(Q) - f'(Q) v``."""
    R = np.asarray(R, dtype=float)
    Q, D = hm.eval_Q_and_delta(R)
    surf = hm.surface
    left = R <= 1.0
    out = np.zeros_like(R)
    small = np.abs(v) < 0.05
    acc = np.zeros_like(R)
    vk = v * v
    for k in range(2, terms + 2):
        dk = np.where(left, surf.df(Q, k), surf.df_top(D, k))
        acc = acc + dk * vk / math.factorial(k)
        vk = vk * v
    out[small] = acc[small]
    big = ~small
    if np.any(big):
        out[big] = (surf.f(Q[big] + v[big]) - surf.f(Q[big]) - (1.0 - hm.one_minus_f1_of_Q(R[big])) * v[big])
    return out


def sup_errors(frame: BlowupFrame, hm: HarmonicMap, corr: Corrector, t: float,
               n_samples: int = 1500, r_fraction: float = 0.5):
    """``sup_{r <= r_fraction t} |t^2 e0|`` and the same for ``e1``."""
    R_hi = r_fraction * float(frame.cone_radius_R(t))
    R = np.concatenate([np.geomspace(1e-3, R_hi, n_samples)])
    r = R / frame.lam(t)
    e0 = np.abs(scaled_e0(frame.nu, hm, R))
    e1 = np.abs(e1_scaled(frame, hm, corr, t, r))
    return _refine_max(lambda x: np.abs(scaled_e0(frame.nu, hm, x)), R, e0), \
        _refine_max(lambda x: np.abs(e1_scaled(frame, hm, corr, t, x / frame.lam(t))), R, e1)


def _refine_max(fun, R, vals):
    i = int(np.argmax(vals))
    lo, hi = R[max(i - 1, 0)], R[min(i + 1, R.size - 1)]
    x = np.geomspace(lo, hi, 41)
    return float(max(vals[i], np.max(fun(x))))


def local_energy_of_profile(frame: BlowupFrame, hm: HarmonicMap, t: float,
                            corrector: Corrector | None = None, radius: float | None = None,
                            tol: float = 1e-10) -> float:
    """Energy of ``u0`` (or ``u1``) inside ``r < radius`` (default: the cone ``r < t``)."""
    nu = frame.nu
    t = float(t)
    lam = float(frame.lam(t))
    R_top = lam * (t if radius is None else float(radius))
    surf = hm.surface

    if corrector is None:
        c = (1 + nu) ** 2 * t ** (2 * nu)

        def dens(s):
            R = math.exp(s)
            g2 = float(hm.g_of_Q(R)) ** 2
            return (0.5 * c * R * g2 + g2 / R) * R
    else:
        ev = U1Evaluator(frame, hm, corrector)

        def dens(s):
            R = math.exp(s)
            r = R / lam
            u, u_t, u_r, _, _ = (float(x) for x in ev.derivs(t, np.array(r)))
            e = 0.5 * (u_t ** 2 + u_r ** 2) + float(surf.g(u)) ** 2 / (2 * r * r)
            return e * r * r

    s_lo = min(-40.0, math.log(R_top) - 40.0)
    pts = [p for p in (-5.0, 0.0, 5.0) if s_lo < p < math.log(R_top)]
    val, err = quad(dens, s_lo, math.log(R_top), points=pts or None, epsabs=0.0, epsrel=tol, limit=500)
    if not math.isfinite(val) or err > 1e3 * tol * max(abs(val), 1e-300):
        raise ConvergenceError(f"local-energy quadrature failed (estimate {err:.2e})")
    return float(val)


def energy_of_Q_by_quadrature(hm: HarmonicMap, tol: float = 1e-12) -> float:
    """``int_0^inf g(Q)^2 / R dR`` (the closed form is ``int_0^rho_M g``)."""
    val, _ = quad(lambda s: float(hm.g_of_Q(math.exp(s))) ** 2, -60.0, 60.0, points=[0.0],
                  epsabs=0.0, epsrel=tol, limit=500)
    return float(val)
