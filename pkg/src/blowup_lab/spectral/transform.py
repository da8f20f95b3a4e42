"""Distorted Fourier transform of the linearized operator.

    f_hat(xi) = int phi(r, xi) f(r) dr,
    f(r)      = int phi(r, xi) f_hat(xi) rho(xi) d xi.

The ``xi`` integral uses composite Gauss-Legendre rules: panels in
``log xi`` below ``xi = 1`` and panels in ``k = sqrt(xi)`` above, where the
transform oscillates with ``r k``.  The spectral mass below the smallest
node is not negligible (it decays like ``1/|log xi|``), so it is added in
closed form from the small-``xi`` law

    rho(xi) ~ 2 / (kappa^2 xi [(log xi + b)^2 + pi^2]),

where ``kappa`` is the constant in ``rho_M - Q ~ kappa / r`` and ``b`` is
fitted at the lowest node.  On that stretch ``phi(r, xi) ~ phi0(r)``, so
the tail contributes ``|f_hat(0)|^2`` times the mass in the Plancherel sum
and ``phi0 f_hat(0)`` times the mass in the inverse.  For the free
operator ``rho = xi/8`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..errors import ConvergenceError, ResolutionError
from .measure import SpectralData, build_spectral_data


def quadrature_grid(xi_min: float = 1e-12, xi_max: float = 2500.0, panels_per_decade: int = 2,
                    k_width: float = 1.0, order: int = 12):
    """Nodes and weights for ``int_{xi_min}^{xi_max} ... d xi``."""
    x, w = leggauss(order)
    nodes, weights = [], []
    lo_top = min(1.0, xi_max)
    if xi_min < lo_top:
        n_pan = max(1, int(math.ceil(panels_per_decade * math.log10(lo_top / xi_min))))
        edges = np.linspace(math.log(xi_min), math.log(lo_top), n_pan + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            s = 0.5 * (a + b) + 0.5 * (b - a) * x
            nodes.append(np.exp(s))
            weights.append(0.5 * (b - a) * w * np.exp(s))
    if xi_max > 1.0:
        k_lo, k_hi = math.sqrt(max(1.0, xi_min)), math.sqrt(xi_max)
        n_pan = max(1, int(math.ceil((k_hi - k_lo) / k_width)))
        edges = np.linspace(k_lo, k_hi, n_pan + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            k = 0.5 * (a + b) + 0.5 * (b - a) * x
            nodes.append(k * k)
            weights.append(0.5 * (b - a) * w * 2.0 * k)
    return np.concatenate(nodes), np.concatenate(weights)


def build_transform_data(potential, xi_min: float = 1e-12, xi_max: float = 2500.0,
                         **kwargs) -> SpectralData:
    """Spectral bundle on the quadrature nodes of ``[xi_min, xi_max]``."""
    xi, w = quadrature_grid(xi_min, xi_max)
    data = build_spectral_data(potential, xi, weights=w, **kwargs)
    data.quad_edges = (float(xi_min), float(xi_max))
    return data


@dataclass
class LowTail:
    """Spectral mass of ``[0, xi_edge]`` from the small-``xi`` law."""

    xi_edge: float
    mass: float
    kappa: float | None
    b: float | None


def low_tail(data: SpectralData, xi_edge: float | None = None) -> LowTail:
    i = int(np.argmin(data.xi))
    xi0, rho0 = float(data.xi[i]), float(data.rho[i])
    if xi_edge is None:
        xi_edge = data.quad_edges[0] if data.quad_edges is not None else xi0
    edge = float(xi_edge)
    if data.potential.is_free:
        # rho = c xi exactly; c from the node
        c = rho0 / xi0
        return LowTail(edge, 0.5 * c * edge ** 2, None, None)
    kappa = float(data.potential.hm.B0)
    s = 2.0 / (kappa ** 2 * xi0 * rho0) - math.pi ** 2
    if s <= 0:
        raise ConvergenceError("small-xi law does not fit the lowest node; lower xi_min")
    L0 = math.log(xi0)
    b = -math.sqrt(s) - L0
    Le = math.log(edge)
    mass = 2.0 / (kappa ** 2 * math.pi) * (math.atan((Le + b) / math.pi) + 0.5 * math.pi)
    return LowTail(edge, mass, kappa, b)


def small_xi_law(tail: LowTail, xi):
    xi = np.asarray(xi, dtype=float)
    if tail.kappa is None:
        return 2.0 * tail.mass / tail.xi_edge ** 2 * xi
    L = np.log(xi) + tail.b
    return 2.0 / (tail.kappa ** 2 * xi * (L * L + math.pi ** 2))


@dataclass
class Transform:
    """Transform of one function: values on the grid plus the ``xi = 0`` value."""

    fhat: np.ndarray
    fhat0: float


def forward_transform(data: SpectralData, r, f, weights) -> Transform:
    """``f_hat(xi) = int phi(r, xi) f(r) dr`` by the supplied radial quadrature."""
    r = np.asarray(r, dtype=float)
    wf = np.asarray(weights, dtype=float) * np.asarray(f, dtype=float)
    fhat = data.phi_values(r) @ wf
    fhat0 = float(np.dot(data.fs.phi0(r), wf))
    return Transform(fhat, fhat0)


def _tail(data: SpectralData, edge: float | None) -> LowTail:
    if data.weights is None:
        raise ValueError("transforms need a spectral bundle built on a quadrature grid")
    if edge is None and data.quad_edges is not None:
        edge = data.quad_edges[0]
    return low_tail(data, edge)


def plancherel_norm(data: SpectralData, t: Transform, edge: float | None = None) -> float:
    """``int |f_hat|^2 rho d xi``."""
    tail = _tail(data, edge)
    return float(np.sum(data.weights * data.rho * t.fhat ** 2) + tail.mass * t.fhat0 ** 2)


def inverse_transform(data: SpectralData, t: Transform, r, edge: float | None = None):
    r = np.asarray(r, dtype=float)
    tail = _tail(data, edge)
    c = data.weights * data.rho * t.fhat
    return c @ data.phi_values(r) + tail.mass * t.fhat0 * data.fs.phi0(r)


def radial_quadrature(r_lo: float, r_hi: float, k_max: float, order: int = 16,
                      log_below: float = 1.0):
    """Gauss-Legendre nodes on ``[r_lo, r_hi]`` fine enough for ``exp(i k r)``, ``k <= k_max``.

    Geometric panels below ``log_below`` (where functions behave like powers
    of ``r``), then uniform panels of at most two nodes per oscillation.
    """
    x, w = leggauss(order)
    width = min(1.0, math.pi * order / (2.0 * max(k_max, 1.0)) / 2.0)
    edges = []
    if r_lo < log_below:
        lo = max(r_lo, 1e-6 * min(log_below, r_hi))
        n_log = max(1, int(math.ceil(2 * math.log10(min(log_below, r_hi) / lo))))
        if r_lo < lo:
            edges.append(r_lo)
        geo = np.geomspace(lo, min(log_below, r_hi), n_log + 1)
        edges.append(geo[0])
        for a, b in zip(geo[:-1], geo[1:]):
            # geometric panels wider than the oscillation scale are split
            m = max(1, int(math.ceil((b - a) / width)))
            edges.extend(np.linspace(a, b, m + 1)[1:])
    start = max(r_lo, log_below)
    if r_hi > start:
        n_lin = max(1, int(math.ceil((r_hi - start) / width)))
        lin = np.linspace(start, r_hi, n_lin + 1)
        edges.extend(lin[1:] if edges else lin)
    edges = np.asarray(edges)
    a, b = edges[:-1, None], edges[1:, None]
    r = 0.5 * (a + b) + 0.5 * (b - a) * x
    wr = 0.5 * (b - a) * w
    return r.ravel(), np.broadcast_to(wr, r.shape).ravel().copy()


def plancherel_defect(data: SpectralData, r, f, weights, edge: float | None = None) -> float:
    """Relative gap between ``int |f_hat|^2 rho`` and ``int f^2``."""
    f = np.asarray(f, dtype=float)
    norm = float(np.dot(weights, f * f))
    t = forward_transform(data, r, f, weights)
    return abs(plancherel_norm(data, t, edge) - norm) / norm


def check_plancherel(data: SpectralData, r, f, weights, tol: float = 1e-3,
                     edge: float | None = None) -> float:
    """Raise ``ResolutionError`` when the grid fails the Plancherel identity for ``f``."""
    defect = plancherel_defect(data, r, f, weights, edge)
    if defect > tol:
        raise ResolutionError(
            f"Plancherel defect {defect:.3e} exceeds {tol:g}; refine the xi grid or the radial rule")
    return defect


def low_frequency_fraction(data: SpectralData, t: Transform, xi_cut: float,
                           edge: float | None = None) -> float:
    """Share of ``int |f_hat|^2 rho`` carried by ``xi < xi_cut``."""
    tail = _tail(data, edge)
    dens = data.weights * data.rho * t.fhat ** 2
    low = dens[data.xi < xi_cut].sum() + tail.mass * t.fhat0 ** 2
    return float(low / (dens.sum() + tail.mass * t.fhat0 ** 2))
