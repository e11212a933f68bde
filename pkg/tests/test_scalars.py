import math
from fractions import Fraction

import mpmath
import pytest

from nilsampler.errors import ParseError
from nilsampler.scalars import format_scalar, parse_scalar, round_to_dd


@pytest.mark.parametrize("text, value", [("1/3", Fraction(1, 3)), ("0.1", Fraction(1, 10)), ("2^10", 1024),
                                         ("-3/4", Fraction(-3, 4)), (7, 7), (Fraction(5, 2), Fraction(5, 2))])
def test_rational_inputs_are_exact(text, value):
    assert parse_scalar(text) == value


def test_irrational_inputs_round_to_double_double():
    mpmath.mp.prec = 300
    for text, ref in [("sqrt(2)", mpmath.sqrt(2)), ("(sqrt(5)-1)/2", (mpmath.sqrt(5) - 1) / 2), ("pi", mpmath.pi),
                      ("exp(1)", mpmath.e), ("log(3)", mpmath.log(3))]:
        q = parse_scalar(text)
        got = mpmath.mpf(q.numerator) / q.denominator
        assert abs((got - ref) / ref) < mpmath.mpf(2) ** -104
        assert round_to_dd(q) == q


def test_float_input_is_taken_at_face_value():
    assert parse_scalar(0.1) == Fraction(0.1)


@pytest.mark.parametrize("bad", ["sqrt(", "__import__('os')", "t", "1/0", "x+1"])
def test_rejects_bad_scalars(bad):
    with pytest.raises((ParseError, ZeroDivisionError)):
        parse_scalar(bad)


def test_format():
    assert format_scalar(Fraction(3)) == "3"
    assert format_scalar(Fraction(-3, 2)) == "-3/2"
    s = format_scalar(parse_scalar("sqrt(2)"))
    assert abs(float(s) - math.sqrt(2)) < 1e-15
    assert abs(parse_scalar(s) - parse_scalar("sqrt(2)")) < Fraction(1, 10**32)
