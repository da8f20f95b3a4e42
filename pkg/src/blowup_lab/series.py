"""Truncated power-series arithmetic.

Coefficient arrays live on the last axis, so a stack of series attached
to many base points is handled in one call.  Everything is truncated to
the length of the first operand unless ``n`` is given.
"""

from __future__ import annotations

import numpy as np


def mul(a: np.ndarray, b: np.ndarray, n: int | None = None) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    n = a.shape[-1] if n is None else n
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (n,)
    out = np.zeros(shape, dtype=np.result_type(a, b))
    na, nb = min(a.shape[-1], n), min(b.shape[-1], n)
    for i in range(na):
        m = min(nb, n - i)
        if m > 0:
            out[..., i:i + m] += a[..., i:i + 1] * b[..., :m]
    return out


def compose(outer: np.ndarray, inner: np.ndarray, n: int | None = None) -> np.ndarray:
    """Coefficients of ``sum_k outer[k] * inner**k``; ``inner`` must have zero constant term."""
    outer = np.asarray(outer)
    inner = np.asarray(inner)
    n = inner.shape[-1] if n is None else n
    shape = np.broadcast_shapes(outer.shape[:-1], inner.shape[:-1]) + (n,)
    dtype = np.result_type(outer, inner)
    out = np.zeros(shape, dtype=dtype)
    power = np.zeros(shape, dtype=dtype)
    power[..., 0] = 1.0
    inner = np.broadcast_to(_pad(inner, n), shape[:-1] + (n,)).copy()
    inner[..., 0] = 0.0
    for k in range(min(outer.shape[-1], n)):
        out += outer[..., k:k + 1] * power
        power = mul(power, inner, n)
    return out


def reciprocal(a: np.ndarray, n: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    n = a.shape[-1] if n is None else n
    a = _pad(a, n)
    out = np.zeros_like(a)
    out[..., 0] = 1.0 / a[..., 0]
    for k in range(1, n):
        out[..., k] = -np.sum(a[..., 1:k + 1] * out[..., k - 1::-1][..., :k], axis=-1) / a[..., 0]
    return out


def power(a: np.ndarray, p: float, n: int | None = None) -> np.ndarray:
    """``a**p`` for a series with nonzero constant term (J.C.P. Miller recurrence)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[-1] if n is None else n
    a = _pad(a, n)
    out = np.zeros_like(a)
    out[..., 0] = a[..., 0] ** p
    for k in range(1, n):
        j = np.arange(1, k + 1)
        s = np.sum(((p + 1) * j - k) * a[..., j] * out[..., k - j], axis=-1)
        out[..., k] = s / (k * a[..., 0])
    return out


def solve_scaling_ode(Gcoeffs, lead: float, n: int) -> np.ndarray:
    """Odd solution ``y = sum_k c_k x**(2k+1)`` of ``x y' = y G(y**2)`` with ``c_0 = lead``.

    ``Gcoeffs`` holds the Taylor coefficients of ``G`` with ``G(0) = 1``.
    Returns ``c`` such that ``y = x * sum_k c_k (x**2)**k``.
    """
    G = np.asarray(Gcoeffs, dtype=float)
    c = np.zeros(n)
    c[0] = lead
    for k in range(1, n):
        # y/x = Y(z), z = x^2;  y^2 = z Y^2; the z^k coefficient of Y*G(zY^2) - Y must equal 2k c_k.
        Y = c.copy()
        Y[k:] = 0.0
        Y2 = mul(Y, Y)
        arg = np.concatenate([[0.0], Y2[:-1]])
        rhs = mul(Y, compose(_pad(G, n), arg))
        c[k] = (rhs[k] - Y[k]) / (2 * k)
    return c


def _pad(a: np.ndarray, n: int) -> np.ndarray:
    m = a.shape[-1]
    if m >= n:
        return a[..., :n]
    pad = np.zeros(a.shape[:-1] + (n - m,), dtype=a.dtype)
    return np.concatenate([a, pad], axis=-1)
