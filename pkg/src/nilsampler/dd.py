"""Vectorised double-double arithmetic on numpy arrays.

A double-double value is a pair ``(hi, lo)`` of float64 arrays (or scalars)
with ``|lo| <= ulp(hi) / 2``; the represented number is ``hi + lo`` and
carries roughly 106 significant bits.  Every routine here works elementwise,
so a single call processes a whole chunk of orbit indices.

The error-free transformations are the classical ones (Knuth two-sum,
Dekker split/product).  numpy has no fused multiply-add, hence the split.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple, Union

import numpy as np

ArrayLike = Union[np.ndarray, float]

_SPLITTER = 134217729.0  # 2**27 + 1

# ln 2 to ~160 bits, as three doubles
_LN2_HI = 0.6931471805599453
_LN2_LO = 2.3190468138462996e-17
_LN2_LO2 = 5.707708438416212e-34

_EXP_SCALE_BITS = 10
_EXP_TAYLOR_TERMS = 8
_INV_FACT = []


class DD(NamedTuple):
    hi: ArrayLike
    lo: ArrayLike


def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a, b):
    s = a + b
    err = b - (s - a)
    return s, err


def split(a):
    c = _SPLITTER * a
    abig = c - a
    ahi = c - abig
    return ahi, a - ahi


def two_prod(a, b):
    p = a * b
    ahi, alo = split(a)
    bhi, blo = split(b)
    err = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, err


def from_float(x) -> DD:
    x = np.asarray(x, dtype=np.float64)
    return DD(x, np.zeros_like(x))


def from_fraction(q: Fraction) -> DD:
    """Nearest double-double to an exact rational (scalar)."""
    hi = float(q)
    lo = float(q - Fraction(hi)) if math.isfinite(hi) else 0.0
    return DD(hi, lo)


def to_fraction(x: DD) -> Fraction:
    return Fraction(float(x.hi)) + Fraction(float(x.lo))


def to_float(x: DD):
    return x.hi + x.lo


def neg(a: DD) -> DD:
    return DD(-a.hi, -a.lo)


def add(a: DD, b: DD) -> DD:
    s, e = two_sum(a.hi, b.hi)
    t, f = two_sum(a.lo, b.lo)
    e = e + t
    s, e = quick_two_sum(s, e)
    e = e + f
    return DD(*quick_two_sum(s, e))


def sub(a: DD, b: DD) -> DD:
    return add(a, DD(-b.hi, -b.lo))


def add_float(a: DD, b) -> DD:
    s, e = two_sum(a.hi, b)
    e = e + a.lo
    return DD(*quick_two_sum(s, e))


def mul(a: DD, b: DD) -> DD:
    p, e = two_prod(a.hi, b.hi)
    e = e + (a.hi * b.lo + a.lo * b.hi)
    return DD(*quick_two_sum(p, e))


def mul_float(a: DD, b) -> DD:
    p, e = two_prod(a.hi, b)
    e = e + a.lo * b
    return DD(*quick_two_sum(p, e))


def sqr(a: DD) -> DD:
    p, e = two_prod(a.hi, a.hi)
    e = e + 2.0 * a.hi * a.lo
    return DD(*quick_two_sum(p, e))


def div(a: DD, b: DD) -> DD:
    q1 = a.hi / b.hi
    r = sub(a, mul_float(b, q1))
    q2 = r.hi / b.hi
    r = sub(r, mul_float(b, q2))
    q3 = r.hi / b.hi
    q1, q2 = quick_two_sum(q1, q2)
    return add_float(DD(q1, q2), q3)


def ldexp(a: DD, k) -> DD:
    return DD(np.ldexp(a.hi, k), np.ldexp(a.lo, k))


def sqrt(a: DD) -> DD:
    """Karp's method: one Newton step on 1/sqrt refined in double-double."""
    hi = np.asarray(a.hi, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = 1.0 / np.sqrt(hi)
        ax = hi * x
        corr = sub(a, sqr(DD(ax, np.zeros_like(ax)))).hi * (x * 0.5)
    res = DD(*two_sum(ax, corr))
    zero = hi == 0.0
    if np.any(zero):
        res = DD(np.where(zero, 0.0, res.hi), np.where(zero, 0.0, res.lo))
    return res


def powi(a: DD, n: int) -> DD:
    """Integer power by repeated squaring (n may be negative)."""
    if n == 0:
        one = np.ones_like(np.asarray(a.hi, dtype=np.float64))
        return DD(one, np.zeros_like(one))
    m = abs(n)
    result = None
    base = a
    while m:
        if m & 1:
            result = base if result is None else mul(result, base)
        m >>= 1
        if m:
            base = sqr(base)
    if n < 0:
        one = np.ones_like(np.asarray(a.hi, dtype=np.float64))
        result = div(DD(one, np.zeros_like(one)), result)
    return result


def root(a: DD, q: int) -> DD:
    """Positive q-th root of a positive double-double (one Newton step)."""
    if q == 1:
        return a
    if q == 2:
        return sqrt(a)
    hi = np.asarray(a.hi, dtype=np.float64)
    x0 = np.power(hi, 1.0 / q)
    x = DD(x0, np.zeros_like(x0))
    # x1 = x0 - (x0^q - a) / (q x0^(q-1))
    xq1 = powi(x, q - 1)
    num = sub(mul(xq1, x), a)
    step = num.hi / (q * xq1.hi)
    return add_float(x, -step)


def _inv_fact():
    if not _INV_FACT:
        for k in range(_EXP_TAYLOR_TERMS + 1):
            _INV_FACT.append(from_fraction(Fraction(1, math.factorial(k))))
    return _INV_FACT


def expm1_small(r: DD) -> DD:
    """exp(r) - 1 for |r| below ~1e-3, Taylor series in double-double."""
    coeffs = _inv_fact()
    acc = DD(np.full_like(np.asarray(r.hi, dtype=np.float64), coeffs[_EXP_TAYLOR_TERMS].hi),
             np.full_like(np.asarray(r.hi, dtype=np.float64), coeffs[_EXP_TAYLOR_TERMS].lo))
    for k in range(_EXP_TAYLOR_TERMS - 1, 0, -1):
        acc = add(mul(acc, r), DD(coeffs[k].hi, coeffs[k].lo))
    return mul(acc, r)


def exp(a: DD) -> DD:
    hi = np.asarray(a.hi, dtype=np.float64)
    lo = np.asarray(a.lo, dtype=np.float64)
    k = np.rint(hi / _LN2_HI)
    # r = a - k ln2, with ln2 carried to three limbs
    r = add(DD(hi, lo), mul_float(DD(-_LN2_HI, -_LN2_LO), k))
    r = add_float(r, -k * _LN2_LO2)
    r = ldexp(r, -_EXP_SCALE_BITS)
    e = expm1_small(r)
    for _ in range(_EXP_SCALE_BITS):
        # (1+e)^2 - 1 = 2e + e^2
        e = add(ldexp(e, 1), sqr(e))
    res = add_float(e, 1.0)
    ki = k.astype(np.int64)
    return ldexp(res, ki)


def log(a: DD) -> DD:
    """Natural log via one Newton step on exp: y1 = y0 + a*exp(-y0) - 1."""
    hi = np.asarray(a.hi, dtype=np.float64)
    y0 = np.log(hi)
    e = exp(DD(-y0, np.zeros_like(y0)))
    corr = add_float(mul(a, e), -1.0)
    return add_float(corr, y0)


def floor(a: DD) -> DD:
    hi = np.asarray(a.hi, dtype=np.float64)
    lo = np.asarray(a.lo, dtype=np.float64)
    fh = np.floor(hi)
    exact = fh == hi
    fl = np.where(exact, np.floor(lo), 0.0)
    return DD(*quick_two_sum(fh, fl))


def frac(a: DD) -> DD:
    """a - floor(a), returned as a double-double in [0, 1)."""
    return sub(a, floor(a))


def frac_to_float(a: DD) -> np.ndarray:
    """Fractional part rounded to float64, kept strictly inside [0, 1)."""
    f = frac(a)
    x = np.asarray(f.hi + f.lo, dtype=np.float64)
    # 1 - tiny rounds up to 1.0; on the circle that is the point 0
    return np.where(x >= 1.0, 0.0, np.where(x < 0.0, 0.0, x))


def dd_sum(x: np.ndarray) -> DD:
    """Compensated sum of a float64 array (pairwise two-sum cascade)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        return DD(0.0, 0.0)
    errs = []
    while x.size > 1:
        if x.size % 2:
            x = np.concatenate([x, [0.0]])
        s, e = two_sum(x[0::2], x[1::2])
        errs.append(np.sum(e))
        x = s
    err = math.fsum(errs)
    return DD(*two_sum(float(x[0]), err))


def dd_sum_dd(x: DD) -> DD:
    """Compensated sum of a double-double array."""
    s = dd_sum(np.asarray(x.hi))
    t = dd_sum(np.asarray(x.lo))
    return add(s, t)
