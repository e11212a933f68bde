import math
import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings

from nilsampler.errors import DomainError, ParseError, UnsupportedTerm, ZeroComparand
from nilsampler.hardy import (Growth, HardyExpr, compare, degree, evaluate, is_bounded, limit_ratio, parse,
                              polynomial_part)
from strategies import hardy_exprs, nonzero_exprs

T = HardyExpr.monomial(1)
LOG = HardyExpr.monomial(0, 1)


def P(s):
    return parse(s)


# arithmetic

def test_exact_cancellation():
    assert (P("t^(3/2)") + P("-t^(3/2)")).is_zero()


def test_like_terms_merge():
    assert P("2t") + P("3t") == P("5t")


def test_terms_kept_in_growth_order():
    f = P("t*log(t)") + P("t")
    assert [x.key for x in f.terms] == [(1, 1), (1, 0)]


def test_near_cancellation_of_irrational_coefficients():
    f = P("sqrt(2)*t") - P("2^(1/2)*t")
    assert f.is_zero()


def test_parse_forms():
    assert P("t^{3/2}") == P("t**1.5") == P("t*sqrt(t)")
    assert P("log(t^3)") == P("3*log(t)") == P("3 log t")
    assert P("t/log(t)").terms[0].beta == -1
    assert P("(t+1)^2") == P("t^2 + 2t + 1")


@pytest.mark.parametrize("bad", ["t +", "foo(t)", "exp(t)", "log(t+1)", "t^t", ""])
def test_parse_errors(bad):
    with pytest.raises((ParseError, UnsupportedTerm)):
        P(bad)


@given(nonzero_exprs)
def test_text_round_trip(f):
    assert P(f.to_text()) == f


# calculus

@pytest.mark.parametrize("f, d", [("t^(3/2)", "(3/2)*t^(1/2)"), ("t*log(t)", "log(t) + 1"), ("log(t)", "t^(-1)")])
def test_differentiate_examples(f, d):
    assert P(f).differentiate() == P(d)


def test_t_log_t_derivative_terms():
    d = P("t*log(t)").differentiate()
    assert [(x.coeff, x.alpha, x.beta) for x in d.terms] == [(1, 0, 1), (1, 0, 0)]


@given(hardy_exprs(), hardy_exprs())
def test_differentiate_is_linear(f, g):
    assert (f + g).differentiate() == f.differentiate() + g.differentiate()


@given(hardy_exprs())
def test_integrate_then_differentiate(f):
    assert f.integrate().differentiate() == f


def test_integrate_refuses_negative_log_powers():
    with pytest.raises(UnsupportedTerm):
        P("t/log(t)").integrate()


# growth

@pytest.mark.parametrize("f, g, kind", [
    ("t/log(t)", "t", Growth.STRICTLY_SLOWER),
    ("t^(3/2)", "t^(3/2)", Growth.EQUAL),
    ("t*log(t)", "t^1.01", Growth.STRICTLY_SLOWER),
    ("t^2", "t", Growth.STRICTLY_FASTER),
    ("3t^2 + t", "t^2", Growth.SAME_ORDER),
])
def test_compare_examples(f, g, kind):
    assert compare(P(f), P(g)).kind is kind


def test_compare_zero_raises():
    with pytest.raises(ZeroComparand):
        compare(HardyExpr(), T)


@pytest.mark.parametrize("f, d", [("t^(3/2)", 2), ("5t^2 + t", 2), ("log(t)", 1), ("t", 1), ("t*log(t)", 2),
                                  ("t^(-1/2)", 0), ("7", 0)])
def test_degree_examples(f, d):
    assert degree(P(f)) == d


def test_limit_ratio():
    assert limit_ratio(P("3t^2"), P("t^2")) == 3
    assert limit_ratio(P("t"), P("t^2")) == 0
    assert limit_ratio(P("t^2"), P("t")) == math.inf


def test_bounded():
    assert is_bounded(P("t^(-1/2)"))
    assert not is_bounded(P("log(t)"))


@pytest.mark.parametrize("f, poly, rest", [("t^(3/2) + 2t + 1", "2t + 1", "t^(3/2)"), ("t^2", "t^2", "0"),
                                           ("log(t)", "0", "log(t)")])
def test_polynomial_part(f, poly, rest):
    assert polynomial_part(P(f)) == (P(poly), P(rest))


rel_order = {Growth.STRICTLY_SLOWER: -1, Growth.SAME_ORDER: 0, Growth.EQUAL: 0, Growth.STRICTLY_FASTER: 1}


@settings(max_examples=50)
@given(nonzero_exprs, nonzero_exprs, nonzero_exprs)
def test_compare_total_preorder(f, g, h):
    fg, gh, fh = (rel_order[compare(a, b).kind] for a, b in ((f, g), (g, h), (f, h)))
    assert rel_order[compare(g, f).kind] == -fg
    if fg <= 0 and gh <= 0:
        assert fh <= 0
    if fg == 0 and gh == 0:
        assert fh == 0


@given(nonzero_exprs)
def test_degree_is_growth_exponent(f):
    d = degree(f)
    if is_bounded(f):
        assert d == 0
        return
    below = rel_order[compare(f, T ** d).kind]
    assert below <= 0
    if d >= 2:
        assert rel_order[compare(f, T ** (d - 1)).kind] == 1


# two-sided << form of the derivative bounds: c f/(t log^2 t) <= |f'| <= C f/t

@pytest.mark.parametrize("f", ["t^(3/2)", "t*log(t)", "log(t)", "t^(1/3)", "t^2/log(t)", "t^(5/2) + t", "log(t)^2"])
def test_derivative_sandwich(f):
    f = P(f)
    d = f.differentiate()
    lo, hi = [], []
    for e in range(3, 10):
        t = 10.0**e
        fv, dv = float(evaluate(f, t)), float(evaluate(d, t))
        lo.append(abs(dv) / (abs(fv) / (t * math.log(t) ** 2)))
        hi.append(abs(dv) / (abs(fv) / t))
    assert min(lo) > 0
    # the upper ratio stays bounded (for t^a it is the constant a, so the strict relation fails)
    assert max(hi) <= 3


def test_upper_ratio_is_constant_for_power():
    f = P("t^(3/2)")
    for t in (1e3, 1e6, 1e9):
        ratio = (float(evaluate(f, t)) / t) / float(evaluate(f.differentiate(), t))
        assert ratio == pytest.approx(2 / 3, rel=1e-14)


# evaluation

def test_evaluate_examples():
    assert evaluate(P("t^2"), 10) == 100
    assert evaluate(P("t^(3/2)"), 10**6) == 10**9
    assert abs(evaluate(P("log(t)"), "exp(2)") - 2) < Fraction(1, 2**100)


def test_evaluate_domain():
    with pytest.raises(DomainError):
        evaluate(T, 1)


def test_standard_precision_is_a_float():
    v = evaluate(P("t^(3/2)"), 4, "standard")
    assert isinstance(v, float) and v == 8.0


def _mp_value(f, t):
    t = mpmath.mpf(t.numerator) / t.denominator
    return mpmath.fsum(mpmath.mpf(x.coeff.numerator) / x.coeff.denominator
                       * mpmath.mpf(t) ** (mpmath.mpf(x.alpha.numerator) / x.alpha.denominator)
                       * mpmath.log(t) ** x.beta for x in f.terms)


def test_extended_matches_mpmath_on_random_pairs():
    mpmath.mp.prec = 300
    rng = random.Random(11)
    worst = 0
    for _ in range(100):
        terms = []
        for _ in range(rng.randint(1, 4)):
            terms.append((Fraction(rng.randint(1, 9), rng.randint(1, 4)), Fraction(rng.randint(-3, 12), rng.choice([1, 2, 3])),
                          rng.randint(0, 3)))
        f = HardyExpr.const(0)
        for c, a, b in terms:
            f = f + HardyExpr.monomial(a, b, c)
        t = rng.choice([rng.randint(2, 10**8), rng.uniform(2, 1e6)])
        got = evaluate(f, t)
        want = _mp_value(f, Fraction(t))
        err = abs((mpmath.mpf(got.numerator) / got.denominator - want) / want)
        worst = max(worst, err)
    assert worst <= mpmath.mpf(2) ** -90
