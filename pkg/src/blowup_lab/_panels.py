"""Piecewise Chebyshev tables on a partition of an interval.

Every panel carries the same number of Chebyshev-Lobatto nodes.  A table
is just the array of nodal values with shape ``(n_panels, order)``; the
helpers below integrate cumulatively, differentiate and interpolate such
tables with spectral accuracy.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct


def lobatto_nodes(order: int) -> np.ndarray:
    """Chebyshev-Lobatto points on [-1, 1] in ascending order."""
    return -np.cos(np.pi * np.arange(order) / (order - 1))


def values_to_coeffs(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients from values at ascending Lobatto nodes (last axis)."""
    n = values.shape[-1]
    v = values[..., ::-1]
    c = dct(v, type=1, axis=-1) / (n - 1)
    c[..., 0] *= 0.5
    c[..., -1] *= 0.5
    return c


def clenshaw(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate row-wise Chebyshev series ``coeffs[i]`` at ``x[i]``."""
    b1 = np.zeros(x.shape, dtype=np.result_type(coeffs, x))
    b2 = np.zeros_like(b1)
    x2 = 2.0 * x
    for k in range(coeffs.shape[-1] - 1, 0, -1):
        b1, b2 = coeffs[..., k] + x2 * b1 - b2, b1
    return coeffs[..., 0] + x * b1 - b2


def _integration_matrix(order: int) -> np.ndarray:
    x = lobatto_nodes(order)
    eye = np.eye(order)
    S = np.empty((order, order))
    for k in range(order):
        c = values_to_coeffs(eye[k])
        S[:, k] = C.chebval(x, C.chebint(c, lbnd=-1.0))
    return S


def _differentiation_matrix(order: int) -> np.ndarray:
    x = lobatto_nodes(order)
    eye = np.eye(order)
    D = np.empty((order, order))
    for k in range(order):
        c = values_to_coeffs(eye[k])
        D[:, k] = C.chebval(x, C.chebder(c))
    return D


class PanelGrid:
    """Partition ``edges`` with ``order`` Lobatto nodes per panel."""

    def __init__(self, edges, order: int = 16):
        self.edges = np.asarray(edges, dtype=float)
        if self.edges.ndim != 1 or self.edges.size < 2 or np.any(np.diff(self.edges) <= 0):
            raise ValueError("panel edges must be strictly increasing")
        self.order = int(order)
        self.x_ref = lobatto_nodes(self.order)
        a, b = self.edges[:-1], self.edges[1:]
        self.half = 0.5 * (b - a)
        self.mid = 0.5 * (a + b)
        self.nodes = self.mid[:, None] + self.half[:, None] * self.x_ref[None, :]
        self._S = _integration_matrix(self.order)
        self._D = _differentiation_matrix(self.order)
        bary = (-1.0) ** np.arange(self.order)
        bary[0] *= 0.5
        bary[-1] *= 0.5
        self._bary = bary

    @classmethod
    def uniform(cls, lo: float, hi: float, width: float, order: int = 16, anchor: float | None = None):
        """Panels of roughly ``width``; ``anchor`` (if inside) is forced to be an edge."""
        if anchor is not None and lo < anchor < hi:
            left = np.linspace(lo, anchor, max(1, int(np.ceil((anchor - lo) / width))) + 1)
            right = np.linspace(anchor, hi, max(1, int(np.ceil((hi - anchor) / width))) + 1)
            edges = np.concatenate([left, right[1:]])
        else:
            edges = np.linspace(lo, hi, max(1, int(np.ceil((hi - lo) / width))) + 1)
        return cls(edges, order)

    @property
    def lo(self) -> float:
        return float(self.edges[0])

    @property
    def hi(self) -> float:
        return float(self.edges[-1])

    def cumulative(self, values: np.ndarray, start: float = 0.0, from_right: bool = False) -> np.ndarray:
        """Integral from the left end to every node, plus ``start``.

        With ``from_right`` the result is minus the integral from each node to
        the right end, i.e. the antiderivative that equals ``start`` there.
        Accumulating from the end where the integrand is small avoids
        cancellation when it grows exponentially across the grid.
        """
        local = (values @ self._S.T) * self.half[:, None]
        totals = local[:, -1]
        if not from_right:
            offsets = np.concatenate([[0.0], np.cumsum(totals)[:-1]])
            return start + local + offsets[:, None]
        right = local - totals[:, None]
        offsets = np.concatenate([np.cumsum(totals[::-1])[::-1][1:], [0.0]])
        return start + right - offsets[:, None]

    def derivative(self, values: np.ndarray) -> np.ndarray:
        return (values @ self._D.T) / self.half[:, None]

    def table(self, values: np.ndarray) -> np.ndarray:
        """Interpolation data for :meth:`evaluate` (the nodal values themselves)."""
        return np.array(values, copy=True)

    def locate(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, self.edges.size - 2)
        x = (t - self.mid[idx]) / self.half[idx]
        return idx, x

    def evaluate(self, table: np.ndarray, t) -> np.ndarray:
        """Barycentric interpolation of nodal values at arbitrary points."""
        t = np.asarray(t, dtype=float)
        idx, x = self.locate(t.ravel())
        diff = x[:, None] - self.x_ref[None, :]
        exact = diff == 0.0
        diff[exact] = 1.0
        k = self._bary / diff
        vals = table[idx]
        out = np.sum(k * vals, axis=1) / np.sum(k, axis=1)
        hit = np.any(exact, axis=1)
        if np.any(hit):
            out[hit] = vals[hit][exact[hit]]
        return out.reshape(t.shape)

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        eps = 1e-12 * max(1.0, abs(self.lo), abs(self.hi))
        return (t >= self.lo - eps) & (t <= self.hi + eps)
