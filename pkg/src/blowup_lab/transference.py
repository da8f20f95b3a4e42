"""Kernel of the transference operator.

On the Fourier side of ``L`` the scaling generator acts as

    (R d/dR u)^ = -2 xi d/dxi u_hat + K u_hat,
    K = -(3/2 + eta rho'(eta)/rho(eta)) delta(xi - eta) + K0,

acting as ``(K f)(eta) = c(eta) f(eta) + PV int K0(eta, xi) f(xi) d xi`` with

    K0(eta, xi) = rho(xi) F(xi, eta) / (eta - xi),
    F(xi, eta) = int W(R) phi(R, xi) phi(R, eta) dR,

where ``W`` comes from ``[L, R d/dR] = 2 L + W``.  ``F`` is symmetric and is
assembled as ``Phi diag(w W) Phi^T`` on a radial rule.  ``apply_kernel``
evaluates the whole right-hand side so the identity can be checked against
the transform of ``R u'``.

The radial integral is cut at ``R_cut``; beyond it ``|W| <= C_W R^-4`` and
the eigenfunctions are bounded by their sampled envelopes, which gives the
tail bound used to choose ``R_cut``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResolutionError
from .spectral.measure import SpectralData, build_spectral_data
from .spectral.transform import radial_quadrature

R_CUT_MAX = 1e5
BOUND_N = 4


def _w_constant(data: SpectralData, R0: float) -> float:
    """Sampled ``sup_{R >= R0} |W(R)| R^4`` (the decay is monotone far out)."""
    R = np.geomspace(R0, 1e6, 200)
    return float(np.max(np.abs(data.potential.W(R)) * R ** 4))


def _envelope(data: SpectralData, R_cut: float) -> np.ndarray:
    """Bound for ``|phi(R, xi_i)|`` on ``R >= R_cut``, one value per ``xi``."""
    env = np.empty(data.n)
    for i in range(data.n):
        far = 2.0 * abs(data.a[i]) * data.xi[i] ** -0.25 * 1.01
        top = max(R_cut, 2.0 * data.r_asym[i])
        R = np.geomspace(R_cut, top, 64) if top > R_cut else np.array([R_cut])
        env[i] = max(far, float(np.max(np.abs(data.phi(i, R)[0]))))
    return env


def choose_cutoff(data: SpectralData, tol: float = 1e-8, R_start: float = 50.0,
                  R_max: float = R_CUT_MAX) -> tuple[float, float]:
    """Smallest ``R_cut`` (doubling from ``R_start``) whose tail bound is below ``tol``.

    Returns ``(R_cut, bound)``.
    """
    R_cut = R_start
    while True:
        if data.potential.is_free:
            return R_cut, 0.0
        C = _w_constant(data, R_cut)
        env = _envelope(data, R_cut)
        bound = C * float(env.max()) ** 2 * R_cut ** -3 / 3.0
        if bound <= tol:
            return R_cut, bound
        if 2 * R_cut > R_max:
            raise ResolutionError(
                f"tail bound {bound:.2e} > {tol:g} at R_cut = {R_cut:g}; cannot reach tolerance")
        R_cut *= 2


def _radial_rule(data: SpectralData, R_cut: float):
    k_max = math.sqrt(float(np.max(data.xi)))
    r, w = radial_quadrature(0.0, R_cut, k_max)
    return r, w


def F_matrix(data: SpectralData, other: SpectralData | None = None, R_cut: float | None = None,
             tol: float = 1e-8, chunk: int = 8192):
    """``F(xi_i, eta_j)`` for the grids of ``data`` and ``other`` (default: the same)."""
    other = data if other is None else other
    if R_cut is None:
        R_cut = max(choose_cutoff(data, tol)[0], choose_cutoff(other, tol)[0])
    r, w = _radial_rule(data if data.xi.max() >= other.xi.max() else other, R_cut)
    ww = w * data.potential.W(r)
    out = np.zeros((data.n, other.n))
    for s in range(0, r.size, chunk):
        sl = slice(s, s + chunk)
        A = data.phi_values(r[sl])
        B = A if other is data else other.phi_values(r[sl])
        out += (A * ww[sl]) @ B.T
    return out, R_cut


def dF_matrix(data: SpectralData, other: SpectralData | None = None, R_cut: float | None = None,
              tol: float = 1e-8):
    """``d/dxi F(xi_i, eta_j)`` and ``d^2/dxi deta F`` from the ``xi``-derivative of ``phi``."""
    other = data if other is None else other
    if R_cut is None:
        R_cut = max(choose_cutoff(data, tol)[0], choose_cutoff(other, tol)[0])
    r, w = _radial_rule(data if data.xi.max() >= other.xi.max() else other, R_cut)
    ww = w * data.potential.W(r)
    phA = np.empty((data.n, r.size))
    pxA = np.empty((data.n, r.size))
    for i in range(data.n):
        v = data.phi(i, r, with_xi_derivative=True)
        phA[i], pxA[i] = v[0], v[2]
    if other is data:
        phB, pxB = phA, pxA
    else:
        phB = np.empty((other.n, r.size))
        pxB = np.empty((other.n, r.size))
        for i in range(other.n):
            v = other.phi(i, r, with_xi_derivative=True)
            phB[i], pxB[i] = v[0], v[2]
    dxi = (pxA * ww) @ phB.T
    dxieta = (pxA * ww) @ pxB.T
    return dxi, dxieta, R_cut


def compute_F(data_or_potential, xi: float, eta: float, tol: float = 1e-8) -> float:
    """``F(xi, eta)`` for two individual frequencies."""
    if isinstance(data_or_potential, SpectralData):
        d = data_or_potential
        one = build_spectral_data(d.potential, np.array([xi, eta]), q0=d.q0, q_min=d.q_min,
                                  fs=d.fs, symbols=d.symbols)
    else:
        one = build_spectral_data(data_or_potential, np.array([xi, eta]))
    F, _ = F_matrix(one, tol=tol)
    return float(F[0, 1])


@dataclass
class KernelTable:
    """``F`` on a square ``xi`` grid together with ``rho`` and the diagonal coefficient."""

    xi: np.ndarray
    F: np.ndarray
    rho: np.ndarray
    diag: np.ndarray
    R_cut: float
    exclusion: float = 2.0
    dF: np.ndarray | None = field(default=None, repr=False)
    dF2_mixed: np.ndarray | None = field(default=None, repr=False)

    def spacing(self, i: int) -> float:
        """Local grid spacing at node ``i``."""
        lo = self.xi[max(i - 1, 0)]
        hi = self.xi[min(i + 1, self.xi.size - 1)]
        return float(hi - lo) / (2 if 0 < i < self.xi.size - 1 else 1)

    def K0(self, i: int, j: int) -> float:
        """Off-diagonal kernel ``K0(xi_j, xi_i)`` (row ``j`` is the output frequency)."""
        return compute_K0(self, self.xi[i], self.xi[j])


def _index(grid, value):
    k = int(np.argmin(np.abs(grid - value)))
    if not math.isclose(grid[k], value, rel_tol=1e-12, abs_tol=0.0):
        raise ValueError(f"{value:g} is not a node of the kernel grid")
    return k


def compute_K0(table: KernelTable, xi: float, eta: float) -> float:
    """``K0(eta, xi) = rho(xi) F(xi, eta) / (eta - xi)`` for grid nodes away from the diagonal."""
    i = _index(table.xi, xi)
    j = _index(table.xi, eta)
    band = table.exclusion * max(table.spacing(i), table.spacing(j))
    if abs(xi - eta) < band:
        raise ValueError("diagonal band: use diag_coeff + PV quadrature rule")
    return float(table.rho[i] * table.F[i, j] / (eta - xi))


def diag_coefficient(data: SpectralData, eta, from_a: bool = False):
    """``-(3/2 + eta rho'(eta)/rho(eta))`` with ``rho'`` from the spectral grid.

    ``eta`` must lie strictly between the second and the second-to-last grid
    nodes (the centered stencil needs neighbours); between nodes the
    logarithmic derivative is interpolated linearly in ``log xi``.  With
    ``from_a`` the derivative comes from ``a'(xi)`` instead of differencing.
    """
    order = np.argsort(data.xi)
    xs = data.xi[order]
    if xs.size < 3:
        raise ValueError("need at least three grid points")
    s = (data.log_derivative_rho_from_a() if from_a else data.log_derivative_rho())[order]
    eta_arr = np.atleast_1d(np.asarray(eta, dtype=float))
    lo, hi = (xs[0], xs[-1]) if from_a else (xs[1], xs[-2])
    if np.any(eta_arr < lo * (1 - 1e-12)) or np.any(eta_arr > hi * (1 + 1e-12)):
        raise ValueError(f"eta outside the interior of the grid [{lo:g}, {hi:g}]")
    vals = -(1.5 + np.interp(np.log(eta_arr), np.log(xs), s))
    return vals if np.ndim(eta) else float(vals[0])


def build_kernel_table(data: SpectralData, tol: float = 1e-8, derivatives: bool = False,
                       R_cut: float | None = None) -> KernelTable:
    order = np.argsort(data.xi)
    if not np.array_equal(order, np.arange(data.n)):
        raise ValueError("kernel grid must be increasing")
    F, R_cut = F_matrix(data, R_cut=R_cut, tol=tol)
    diag = np.full(data.n, np.nan)
    diag[1:-1] = diag_coefficient(data, data.xi[1:-1])
    table = KernelTable(data.xi.copy(), F, data.rho.copy(), diag, R_cut)
    if derivatives:
        table.dF, table.dF2_mixed, _ = dF_matrix(data, R_cut=R_cut, tol=tol)
    return table


# Reference envelopes for the kernel bounds (``N`` fixed at ``BOUND_N``).

def _separation(xi, eta, N):
    return (1.0 + np.abs(np.sqrt(xi) - np.sqrt(eta))) ** -N


def value_envelope(xi, eta, N: int = BOUND_N):
    s = xi + eta
    return np.where(s <= 1, s, s ** -1.5 * _separation(xi, eta, N))


def first_derivative_envelope(xi, eta, N: int = BOUND_N):
    s = xi + eta
    return np.where(s <= 1, 1.0, s ** -2.0 * _separation(xi, eta, N))


def second_derivative_envelope(xi, eta, N: int = BOUND_N):
    s = xi + eta
    # (1 + |log s|)^3 rather than |log s|^3, which vanishes at s = 1
    return np.where(s <= 1, (1.0 + np.abs(np.log(s))) ** 3, s ** -2.5 * _separation(xi, eta, N))


@dataclass
class BoundFit:
    value: float
    first: float
    mixed: float | None


def fit_bound_constants(table: KernelTable, N: int = BOUND_N) -> BoundFit:
    """Smallest constants making each family hold on the sampled grid."""
    X, E = np.meshgrid(table.xi, table.xi, indexing="ij")
    value = float(np.max(np.abs(table.F) / value_envelope(X, E, N)))
    first = mixed = None
    if table.dF is not None:
        # both first derivatives: d/deta F(xi, eta) = d/dxi F(eta, xi) by symmetry
        both = np.abs(table.dF) + np.abs(table.dF.T)
        first = float(np.max(both / first_derivative_envelope(X, E, N)))
        mixed = float(np.max(np.abs(table.dF2_mixed) / second_derivative_envelope(X, E, N)))
    return BoundFit(value, first, mixed)



@dataclass
class KernelApplication:
    """``(K f_hat)(eta)`` with the transform pieces used to test the identity."""

    eta: np.ndarray
    Kf: np.ndarray
    fhat: np.ndarray
    dfhat: np.ndarray
    diag: np.ndarray


def apply_kernel(data: SpectralData, r, f, weights, eta, R_cut: float = 800.0) -> KernelApplication:
    """Apply ``K`` to the transform of ``f`` (radial samples with weights) at ``eta``.

    ``data`` must be a quadrature bundle.  The principal value subtracts the
    value at ``eta``::

        PV int g/(xi - eta) = int (g - g(eta))/(xi - eta) + g(eta) log((hi - eta)/(eta - lo))

    with ``g = rho F f_hat`` and ``[lo, hi]`` the quadrature range; the part
    below ``lo`` uses the small-``xi`` mass with ``phi(., xi) ~ phi0``.
    The diagonal coefficient uses the analytic ``a'``.
    """
    from .spectral.transform import forward_transform, low_tail

    if data.weights is None or data.quad_edges is None:
        raise ValueError("apply_kernel needs a quadrature bundle")
    lo, hi = data.quad_edges
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if np.any(eta <= lo) or np.any(eta >= hi):
        raise ValueError("eta must lie inside the quadrature range")
    r = np.asarray(r, dtype=float)
    wf = np.asarray(weights, dtype=float) * np.asarray(f, dtype=float)
    t = forward_transform(data, r, f, weights)
    de = build_spectral_data(data.potential, eta, q0=data.q0, q_min=data.q_min, fs=data.fs,
                             symbols=data.symbols)
    fhat_e = de.phi_values(r) @ wf
    dfhat_e = np.array([de.phi(k, r, with_xi_derivative=True)[2] @ wf for k in range(de.n)])
    F, _ = F_matrix(data, other=de, R_cut=R_cut)
    Fee = np.diag(F_matrix(de, R_cut=R_cut)[0])
    tail = low_tail(data, lo)
    i0 = int(np.argmin(data.xi))
    diag = -(1.5 + de.log_derivative_rho_from_a())
    Kf = np.empty(eta.size)
    for k, e in enumerate(eta):
        g = data.rho * F[:, k] * t.fhat
        ge = de.rho[k] * Fee[k] * fhat_e[k]
        pv = np.sum(data.weights * (g - ge) / (data.xi - e)) + ge * math.log((hi - e) / (e - lo))
        pv += tail.mass * F[i0, k] * t.fhat0 / (0.0 - e)
        # K0(eta, xi) = rho F / (eta - xi), the negative of the PV integrand above
        Kf[k] = diag[k] * fhat_e[k] - pv
    return KernelApplication(eta, Kf, fhat_e, dfhat_e, diag)
