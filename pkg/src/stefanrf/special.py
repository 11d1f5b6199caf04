"""Exponential integral E1 and complementary error function.

Both are implemented to full double precision with the classic split:
a power/Taylor series on the small-argument side and a Lentz-evaluated
continued fraction on the large side.  Inputs may be scalars or arrays;
scalars come back as floats.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

EULER_GAMMA = 0.5772156649015328606

_TINY = 1e-300
_CF_TOL = 1e-16
_CF_MAX_ITER = 300


def _lentz(a_fn, b_fn, shape):
    """Evaluate the continued fraction K(a_j / b_j) elementwise.

    ``a_fn(j)`` and ``b_fn(j)`` return the j-th coefficients (arrays of the
    given shape), j starting at 1.  Modified Lentz with zero-guarding.
    """
    f = np.full(shape, _TINY)
    c = f.copy()
    d = np.zeros(shape)
    converged = np.zeros(shape, dtype=bool)
    for j in range(1, _CF_MAX_ITER + 1):
        a = a_fn(j)
        b = b_fn(j)
        d = b + a * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + a / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = c * d
        f = f * delta
        converged |= np.abs(delta - 1.0) < _CF_TOL
        if np.all(converged):
            break
    return f


def exp_integral_e1(z):
    """E1(z) = integral of exp(-t)/t from z to infinity, for z > 0.

    Series about zero for z <= 1, continued fraction otherwise; relative
    accuracy ~1e-14 across the positive axis.
    """
    z_arr = np.asarray(z, dtype=float)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    if np.any(z_arr <= 0.0) or not np.all(np.isfinite(z_arr)):
        raise DomainError("exp_integral_e1 requires z > 0")

    out = np.empty_like(z_arr)

    small = z_arr <= 1.0
    if np.any(small):
        zs = z_arr[small]
        # E1(z) = -gamma - ln z + sum_{k>=1} (-1)^{k+1} z^k / (k * k!)
        total = np.zeros_like(zs)
        term = np.ones_like(zs)
        for k in range(1, 26):
            term = term * zs / k
            total += term / k if k % 2 == 1 else -term / k
        out[small] = -EULER_GAMMA - np.log(zs) + total

    large = ~small
    if np.any(large):
        zl = z_arr[large]
        # E1(z) = e^{-z} / (z + 1 - 1^2/(z + 3 - 2^2/(z + 5 - ...)))
        cf = _lentz(
            lambda j: np.ones_like(zl) if j == 1 else -np.full_like(zl, float(j - 1) ** 2),
            lambda j: zl + (2 * j - 1),
            zl.shape,
        )
        out[large] = np.exp(-zl) * cf

    return float(out[0]) if scalar else out


def _erf_series(z):
    # erf(z) = 2/sqrt(pi) * sum (-1)^k z^{2k+1} / (k! (2k+1)); |z| < ~1.6
    total = np.zeros_like(z)
    term = z.copy()
    z2 = z * z
    for k in range(0, 40):
        if k > 0:
            term = term * (-z2) / k
        total += term / (2 * k + 1)
    return (2.0 / math.sqrt(math.pi)) * total


def _erfc_cf(z):
    # erfc(z) = e^{-z^2}/sqrt(pi) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
    cf = _lentz(
        lambda j: np.ones_like(z) if j == 1 else np.full_like(z, (j - 1) / 2.0),
        lambda j: z,
        z.shape,
    )
    return np.exp(-z * z) / math.sqrt(math.pi) * cf


def erfc(z):
    """Complementary error function, accurate to ~1e-14 relative."""
    z_arr = np.asarray(z, dtype=float)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)

    out = np.empty_like(z_arr)
    a = np.abs(z_arr)
    small = a < 1.5
    if np.any(small):
        out[small] = 1.0 - _erf_series(a[small])
    if np.any(~small):
        out[~small] = _erfc_cf(a[~small])
    neg = z_arr < 0
    out[neg] = 2.0 - out[neg]

    return float(out[0]) if scalar else out


def erf(z):
    return 1.0 - erfc(z)
