"""Scalar structure functions of the quasi-Poisson ball and their defining relations.

    b(t) = cot(t/2) - 2/t            (real analytic on |t| < 2 pi, b(0) = 0)
    a(t) = t cot(t/2) = 2 + t b(t)
    c(t) = (exp(i t) - 1)/(i t)      (entire, c(0) = 1)
    phi(s) = 1/s - coth(s/2)/2       (meromorphic, b(t) = 2 i phi(-i t))

For |t| < ``SERIES_RADIUS`` every function is evaluated from its power series (Bernoulli
numbers for b and a); the closed forms lose accuracy to cancellation near 0.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, factorial

import mpmath
import numpy as np

SERIES_RADIUS = 1.0
SERIES_TERMS = 16
C_TERMS = 22
TWO_PI = 2.0 * np.pi


class OutOfBranch(ValueError):
    """Argument outside the principal interval |t| < 2 pi."""


class PoleProximity(ValueError):
    """Argument too close to a pole of phi."""


def _check_branch(t):
    if np.any(np.abs(t) >= TWO_PI):
        raise OutOfBranch(f"|t| must be < 2*pi, got {t}")


# b(t) = sum_{k>=1} 2 (-1)^k B_2k t^(2k-1) / (2k)!  from  x cot x = sum (-1)^k 4^k B_2k x^2k / (2k)!
def _bernoulli(m):
    """Exact Bernoulli numbers B_0..B_m (B_1 = -1/2)."""
    B = [Fraction(1)]
    for j in range(1, m + 1):
        B.append(-sum(comb(j + 1, k) * B[k] for k in range(j)) / (j + 1))
    return B


_B = _bernoulli(2 * SERIES_TERMS)
_BCOEF = np.array([float(2 * (-1) ** k * _B[2 * k] / factorial(2 * k)) for k in range(1, SERIES_TERMS + 1)])


def _b_series(x, deriv=0):
    """Series of b (deriv=0) or b' (deriv=1) in powers of x^2 (Horner)."""
    x = np.asarray(x)
    x2 = x * x
    out = np.zeros_like(x)
    for k in range(SERIES_TERMS, 0, -1):
        c = _BCOEF[k - 1] * ((2 * k - 1) if deriv else 1)
        out = out * x2 + c
    return out * x if deriv == 0 else out


def _apply(t, closed, series):
    t = np.asarray(t)
    t = t.astype(np.result_type(t.dtype, float))
    small = np.abs(t) < SERIES_RADIUS
    out = np.empty(t.shape, dtype=t.dtype)
    if np.any(small):
        out[small] = series(t[small])
    if np.any(~small):
        out[~small] = closed(t[~small])
    return out if out.ndim else out[()]


def b_fn(t):
    _check_branch(t)
    return _apply(t, lambda x: 1.0 / np.tan(0.5 * x) - 2.0 / x, _b_series)


def db_fn(t):
    """b'(t) = -1/(2 sin^2(t/2)) + 2/t^2."""
    _check_branch(t)
    return _apply(t, lambda x: -0.5 / np.sin(0.5 * x) ** 2 + 2.0 / x**2, lambda x: _b_series(x, 1))


def a_fn(t):
    """a(t) = t cot(t/2) = 2 + t b(t)."""
    _check_branch(t)
    return _apply(t, lambda x: x / np.tan(0.5 * x), lambda x: 2.0 + x * _b_series(x))


def da_fn(t):
    """a'(t) = cot(t/2) - (t/2)(1 + cot^2(t/2)) = b + t b'."""
    _check_branch(t)

    def closed(x):
        ct = 1.0 / np.tan(0.5 * x)
        return ct - 0.5 * x * (1 + ct**2)

    return _apply(t, closed, lambda x: _b_series(x) + x * _b_series(x, 1))


def _c_series(x, deriv=False):
    """c(x) = sum_k (i x)^k / (k+1)!  and its derivative."""
    x = np.asarray(x, dtype=complex)
    out = np.zeros_like(x)
    for k in range(C_TERMS, -1, -1):
        coef = 1j**k / factorial(k + 1)
        if deriv:
            out = out * x + (k + 1) * 1j ** (k + 1) / factorial(k + 2)
        else:
            out = out * x + coef
    return out


def c_fn(t):
    """c(t) = (exp(i t) - 1)/(i t); entire, evaluated for real or complex t."""
    t = np.asarray(t)
    tc = t.astype(complex)
    small = np.abs(tc) < SERIES_RADIUS
    out = np.empty(tc.shape, dtype=complex)
    out[small] = _c_series(tc[small])
    big = ~small
    out[big] = np.expm1(1j * tc[big]) / (1j * tc[big])
    return out if out.ndim else out[()]


def dc_fn(t):
    """c'(t) = exp(i t)/t - (exp(i t) - 1)/(i t^2)."""
    t = np.asarray(t)
    tc = t.astype(complex)
    small = np.abs(tc) < SERIES_RADIUS
    out = np.empty(tc.shape, dtype=complex)
    out[small] = _c_series(tc[small], deriv=True)
    big = ~small
    x = tc[big]
    out[big] = np.exp(1j * x) / x - np.expm1(1j * x) / (1j * x**2)
    return out if out.ndim else out[()]


def _sin_series(x, start=0):
    """sum_{k >= start} (-1)^k x^(2(k - start)) / (2k+1)!  (sin(x)/x for start = 0)."""
    x2 = np.asarray(x) ** 2
    out = np.zeros_like(x2)
    for k in range(C_TERMS, start - 1, -1):
        out = out * x2 + (-1) ** k / factorial(2 * k + 1)
    return out


def varphi_fn(s, pole_tol=1e-8):
    """phi(s) = 1/s - coth(s/2)/2 for complex s away from 2 pi i Z minus {0}."""
    s = np.asarray(s, dtype=complex)
    k = np.round(np.imag(s) / TWO_PI)
    near = (np.abs(s - 1j * TWO_PI * k) < pole_tol) & (k != 0)
    if np.any(near):
        raise PoleProximity("phi has a pole at nonzero multiples of 2 pi i")
    small = np.abs(s) < SERIES_RADIUS
    out = np.empty(s.shape, dtype=complex)
    out[small] = _b_series(1j * s[small]) / 2j  # b(i s) = 2 i phi(s)
    x = s[~small]
    out[~small] = 1.0 / x - 0.5 / np.tanh(0.5 * x)
    return out if out.ndim else out[()]


def sinc_defect(s):
    """(1 - sin(s)/s)/s, the coefficient appearing in the ball 2-form; series near 0."""
    return _apply(
        s,
        lambda x: (1.0 - np.sin(x) / x) / x,
        lambda x: -x * _sin_series(x, 1),
    )


def sinc(s):
    return _apply(s, lambda x: np.sin(x) / x, _sin_series)


# ---------------------------------------------------------------------------
# defining relations


def _closed_mp(t, dps=40):
    """(a, b, a', c, c') at t != 0 from the closed forms in mpmath arithmetic."""
    with mpmath.workdps(dps):
        t = mpmath.mpf(t)
        ct = mpmath.cot(t / 2)
        e = mpmath.exp(1j * t)
        return (
            t * ct,
            ct - 2 / t,
            ct - t / 2 * (1 + ct**2),
            (e - 1) / (1j * t),
            e / t - (e - 1) / (1j * t**2),
        )


def ansatz_residual(t, a=None, b=None, da=None, exact=False):
    """a b + a' (a - t b) + t, zero exactly when (a, b) define a quasi-Poisson ansatz.

    Defaults to the ball functions; custom callables may be supplied for other families.
    Near |t| = 2 pi the terms reach ~1e5 and the float64 value is limited by roundoff in
    t b(t) amplified by a'(t); ``exact=True`` evaluates the same closed forms with 40 digits.
    """
    if exact:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for i, ti in np.ndenumerate(t):
            if ti != 0.0:
                with mpmath.workdps(40):
                    A, B, dA, _, _ = _closed_mp(ti)
                    out[i] = float(abs(A * B + dA * (A - ti * B) + ti))
        return out if out.ndim else out[()]
    a = a_fn if a is None else a
    b = b_fn if b is None else b
    da = da_fn if da is None else da
    at, bt, dat = a(t), b(t), da(t)
    return at * bt + dat * (at - t * bt) + t


def momentmap_relations_residual(t, exact=False):
    """Residuals of  c a = 2 + i t c  and  c'(a - t b) - c b = i c."""
    if exact and t != 0.0:
        with mpmath.workdps(40):
            at, bt, _, ct, dct = _closed_mp(t)
            r1 = ct * at - 2 - 1j * t * ct
            r2 = dct * (at - t * bt) - ct * bt - 1j * ct
            return float(abs(r1)), float(abs(r2))
    at, bt = a_fn(t), b_fn(t)
    ct, dct = c_fn(t), dc_fn(t)
    r1 = ct * at - 2.0 - 1j * t * ct
    r2 = dct * (at - t * bt) - ct * bt - 1j * ct
    return np.abs(r1), np.abs(r2)
