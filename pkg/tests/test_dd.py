from fractions import Fraction

import mpmath
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from nilsampler import dd

mpmath.mp.prec = 300

finite = st.floats(min_value=-1e12, max_value=1e12, allow_nan=False).filter(lambda x: abs(x) > 1e-12)


def mp_of(x: dd.DD):
    return mpmath.mpf(float(x.hi)) + mpmath.mpf(float(x.lo))


def rel(a, b):
    return abs((a - b) / b)


def test_two_sum_is_exact():
    s, e = dd.two_sum(np.float64(1.0), np.float64(1e-20))
    assert Fraction(float(s)) + Fraction(float(e)) == Fraction(1) + Fraction(1e-20)


@given(finite, finite)
def test_two_prod_exact(a, b):
    p, e = dd.two_prod(np.float64(a), np.float64(b))
    assert Fraction(float(p)) + Fraction(float(e)) == Fraction(a) * Fraction(b)


@given(finite, finite, finite, finite)
def test_mul_div_relative_error(a, b, c, d):
    x = dd.add(dd.from_float(np.float64(a)), dd.from_float(np.float64(b * 1e-17)))
    y = dd.add(dd.from_float(np.float64(c)), dd.from_float(np.float64(d * 1e-17)))
    assert rel(mp_of(dd.mul(x, y)), mp_of(x) * mp_of(y)) < mpmath.mpf(2) ** -100
    assert rel(mp_of(dd.div(x, y)), mp_of(x) / mp_of(y)) < mpmath.mpf(2) ** -100


@given(st.floats(min_value=1e-6, max_value=1e18))
def test_sqrt_log_exp(a):
    x = dd.from_float(np.float64(a))
    assert rel(mp_of(dd.sqrt(x)), mpmath.sqrt(a)) < mpmath.mpf(2) ** -100
    lg = dd.log(x)
    if a != 1:
        assert abs(mp_of(lg) - mpmath.log(a)) < mpmath.mpf(2) ** -100 * max(1, abs(mpmath.log(a)))


@given(st.floats(min_value=-40, max_value=40))
def test_exp(a):
    x = dd.from_float(np.float64(a))
    assert rel(mp_of(dd.exp(x)), mpmath.exp(a)) < mpmath.mpf(2) ** -98


@settings(max_examples=50)
@given(st.floats(min_value=2, max_value=1e8), st.integers(1, 7), st.integers(1, 5))
def test_root_and_powi(a, p, q):
    x = dd.from_float(np.float64(a))
    r = dd.powi(dd.root(x, q), p)
    assert rel(mp_of(r), mpmath.mpf(a) ** (mpmath.mpf(p) / q)) < mpmath.mpf(2) ** -98


def test_fraction_round_trip():
    q = Fraction(1, 3)
    x = dd.from_fraction(q)
    assert abs(dd.to_fraction(x) - q) < Fraction(1, 2**105)


def test_frac_of_large_value_keeps_fraction_digits():
    # 10^18 + 0.25 is not representable in one double
    x = dd.add(dd.from_float(np.float64(1e18)), dd.from_float(np.float64(0.25)))
    assert dd.frac_to_float(x) == 0.25


def test_dd_sum_matches_fsum_oracle():
    rng = np.random.default_rng(4)
    v = rng.standard_normal(100_001) * 10.0 ** rng.integers(-8, 8, 100_001)
    s = dd.dd_sum(v)
    exact = sum(Fraction(float(t)) for t in v)
    assert abs(Fraction(float(s.hi)) + Fraction(float(s.lo)) - exact) <= abs(exact) * Fraction(1, 2**90) + Fraction(1, 2**200)
