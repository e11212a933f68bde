
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilsampler.errors import EmptyInput
from nilsampler.hardy import HardyExpr, compare, Growth, is_bounded, parse
from nilsampler.normal_form import (CharacteristicPair, characteristic_pair, check_property_p, check_property_p_w,
                                    choose_w, normal_form, simple_normal_form, verify_normal_form)
from nilsampler.schemes import IDENTITY, LOG, POWERLOG_HALF
from strategies import hardy_exprs


def P(*fs):
    return [parse(f) for f in fs]


@pytest.mark.parametrize("fs, pair", [(("t^(3/2)", "t"), (2, 1)), (("t^2", "3t^2 + t"), (2, 2)), (("1",), (0, 1))])
def test_characteristic_pair(fs, pair):
    assert characteristic_pair(P(*fs)) == CharacteristicPair(*pair)


def test_characteristic_pair_empty():
    with pytest.raises(EmptyInput):
        characteristic_pair([])


def test_pair_order_is_lexicographic():
    assert CharacteristicPair(1, 5) < CharacteristicPair(2, 1) < CharacteristicPair(2, 2)


def test_simple_normal_form_examples():
    nf = simple_normal_form(P("t^(3/2) + 2t"))
    assert nf.g == P("t^(3/2)") and nf.lam == [[1]] and nf.p == P("2t")
    nf = simple_normal_form(P("t^2"))
    assert nf.g == [] and nf.p == P("t^2")
    fs = P("t^(3/2)", "t^(3/2) + log(t)")
    nf = simple_normal_form(fs)
    assert nf.g == P("log(t)", "t^(3/2)")
    assert nf.lam == [[0, 1], [1, 1]]
    assert nf.p == P("0", "0")
    assert verify_normal_form(fs, nf, closed=False) == []


def test_normal_form_examples():
    nf = normal_form(P("t^(3/2)"))
    assert nf.g == P("(3/2)*t^(1/2)", "t^(3/2)")
    assert nf.g[1].differentiate() == nf.g[0]
    nf = normal_form(P("t"))
    assert nf.g == [] and nf.p == P("t")
    nf = normal_form(P("t*log(t)"))
    assert P("t*log(t)")[0].differentiate() == P("log(t) + 1")[0]
    # the closure is spanned modulo polynomials: log t is present, and the top element's derivative is in g
    assert parse("log(t)") in nf.g
    top = nf.g[-1]
    assert top.differentiate() in nf.g
    assert nf.residual(P("t*log(t)")) == [HardyExpr()]


def test_derivative_closure_with_mixed_inputs():
    fs = P("t^(5/2) + 2*log(t)", "t^(3/2)*log(t)", "t^2 + t^(1/2)")
    nf = normal_form(fs)
    assert verify_normal_form(fs, nf) == []


def test_constants_and_zeros_are_absorbed():
    fs = P("0", "5", "t^(3/2) + 1")
    nf = normal_form(fs)
    assert verify_normal_form(fs, nf) == []
    assert nf.p[1] == parse("5")


@settings(max_examples=60, deadline=None)
@given(st.lists(hardy_exprs(max_terms=3), min_size=1, max_size=3))
def test_normal_form_properties_random(fs):
    trace = []
    nf = normal_form(fs, trace=trace)
    assert verify_normal_form(fs, nf) == []
    for a, b in zip(nf.g, nf.g[1:]):
        assert compare(a, b).kind is Growth.STRICTLY_SLOWER
    for r in nf.residual(fs):
        assert r.is_zero() or (is_bounded(r) and r.growth_key() < (0, 0))
    assert all(b < a for a, b in zip(trace, trace[1:]))


@settings(max_examples=60, deadline=None)
@given(st.lists(hardy_exprs(max_terms=3), min_size=1, max_size=3))
def test_simple_normal_form_random(fs):
    trace = []
    nf = simple_normal_form(fs, trace=trace)
    assert verify_normal_form(fs, nf, closed=False) == []
    assert all(b < a for a, b in zip(trace, trace[1:]))


# property (P) and (P_W)

def test_property_p_counterexample():
    rep = check_property_p(P("t*log(t)"))
    assert not rep.holds
    w = rep.witness
    assert w.orders == [1]
    assert w.combination == parse("log(t) + 1")
    assert compare(w.non_polynomial, parse("log(t)")).kind in (Growth.EQUAL, Growth.SAME_ORDER)


def test_higher_powers_also_fail():
    for i in range(1, 5):
        assert not check_property_p(P(f"t^{i}*log(t)")).holds


@pytest.mark.parametrize("fs, scheme, holds", [
    (("t^(3/2)",), IDENTITY, True),
    (("t^2 + 3t",), IDENTITY, True),
    (("t*log(t)",), POWERLOG_HALF, True),
    (("t*log(t)",), IDENTITY, False),
    (("t*log(t)",), LOG, True),
    (("log(t)",), IDENTITY, False),
    (("t^(1/2)",), IDENTITY, True),
])
def test_property_p_w_examples(fs, scheme, holds):
    rep = check_property_p_w(P(*fs), scheme)
    assert rep.holds is holds
    assert (rep.witness is None) is holds


def test_span_combination_without_single_witness():
    # log t is in the span of the derivative closure, but no single choice of derivative orders reaches it
    fs = P("t^(3/2) + log(t)", "t^(3/2) + t^(1/2)")
    assert check_property_p(fs).holds


def test_combination_of_two_functions_is_found():
    fs = P("t^(3/2) + log(t)", "t^(3/2)")
    rep = check_property_p(fs)
    assert not rep.holds
    assert rep.witness.coefficients == [1, -1] or rep.witness.coefficients == [-1, 1]


@pytest.mark.parametrize("fs, name", [(("t^(3/2)",), "cesaro"), (("t*log(t)",), "powlog:0.5"),
                                      (("t^(1/2)",), "cesaro"), (("t^2*log(t)^2",), "cesaro"), (("t^2*log(t)",), "powlog:0.5")])
def test_choose_w(fs, name):
    assert choose_w(P(*fs)).name == name


@settings(max_examples=60, deadline=None)
@given(st.lists(hardy_exprs(max_terms=3), min_size=1, max_size=3))
def test_chosen_w_passes(fs):
    scheme = choose_w(fs)
    assert check_property_p_w(fs, scheme).holds


@settings(max_examples=60, deadline=None)
@given(st.lists(hardy_exprs(max_terms=3), min_size=1, max_size=2))
def test_p_is_p_w_with_identity(fs):
    assert check_property_p(fs).holds == check_property_p_w(fs, IDENTITY).holds
