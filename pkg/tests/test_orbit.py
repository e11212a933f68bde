import math
import random
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from nilsampler.errors import NonCommuting, NumericBudgetError, RangeError
from nilsampler.hardy import HardyExpr, parse
from nilsampler.nilgroup import GroupElement, one_parameter_curve, positions
from nilsampler.orbit import (OrbitSpec, compile_orbit, evaluate_direct, generate, integer_valued, spec_from_json,
                              validate)
from nilsampler.schemes import LOG
from oracles import orbit_point

H = GroupElement.heisenberg


def circdist(x, y):
    d = abs(x - y) % 1.0
    return min(d, 1 - d)


def all_points(co, **kw):
    chunks = list(generate(co, **kw))
    return np.concatenate([c.n for c in chunks]), np.concatenate([c.coords for c in chunks])


def test_golden_circle():
    spec = OrbitSpec(2, [(GroupElement.circle("(sqrt(5)-1)/2"), parse("t"))], n_start=1, n_end=5)
    _, x = all_points(compile_orbit(spec))
    golden = (math.sqrt(5) - 1) / 2
    assert x[:, 0] == pytest.approx([(k * golden) % 1 for k in range(1, 6)], abs=1e-15)
    assert x[0, 0] == pytest.approx(0.6180339887, abs=1e-10)


def test_compiled_forms():
    co = compile_orbit(OrbitSpec(3, [(H(1, 0, 0), parse("t^(3/2)"))]))
    assert co.entries[(0, 1)] == {(1,): 1} and co.entries[(1, 2)] == {} and co.entries[(0, 2)] == {}
    co = compile_orbit(OrbitSpec(3, [(H(1, 1, 0), parse("t^(3/2)"))]))
    assert co.entries[(0, 1)] == {(1,): 1} and co.entries[(1, 2)] == {(1,): 1}
    assert co.entries[(0, 2)] == {(2,): Fraction(1, 2), (1,): Fraction(-1, 2)}


def test_central_and_horizontal_compose_additively():
    spec = OrbitSpec(3, [(H(1, 0, 0), parse("t^(3/2)")), (H(0, 0, "sqrt(3)"), parse("t^2"))], n_end=10)
    x, y, z = evaluate_direct(spec, 5, reduce=False)
    assert y == 0
    assert abs(float(z) - math.sqrt(3) * 25) < 1e-12
    assert abs(float(x) - 5**1.5) < 1e-12
    co = compile_orbit(spec)
    red = co.points(np.array([5]))[0]
    assert red == pytest.approx(evaluate_direct(spec, 5), abs=1e-12)


def test_noncommuting_refused():
    spec = OrbitSpec(3, [(H(1, 0, 0), parse("t")), (H(0, 1, 0), parse("t^2"))])
    with pytest.raises(NonCommuting):
        compile_orbit(spec)
    diag = {d.name: d for d in validate(spec)}
    assert not diag["commuting"].ok


def test_validate_examples():
    diag = {d.name: d for d in validate(OrbitSpec(3, [(H(1, "sqrt(2)", 0), parse("t^(3/2)"))]))}
    assert all(d.ok for d in diag.values())
    diag = {d.name: d for d in validate(OrbitSpec(2, [(GroupElement.circle(1), parse("t*log(t)"))]))}
    assert not diag["property_P"].ok
    assert "log(t) + 1" in diag["property_P"].detail
    diag = {d.name: d for d in validate(OrbitSpec(2, [(GroupElement.circle(1), parse("t*log(t)"))], scheme=LOG))}
    assert diag["property_P_W"].ok


def test_integer_valued():
    assert integer_valued(parse("t^2"))
    assert integer_valued(parse("t^2/2 - t/2"))
    assert not integer_valued(parse("t^2/2"))
    assert not integer_valued(parse("t^(3/2)"))


def test_range_checks(monkeypatch):
    a = GroupElement.circle(1)
    with pytest.raises(RangeError):
        list(generate(compile_orbit(OrbitSpec(2, [(a, parse("log(t)"))], n_start=1, n_end=10))))
    with pytest.raises(RangeError):
        list(generate(compile_orbit(OrbitSpec(2, [(a, parse("t"))], n_start=2, n_end=10**9))))
    monkeypatch.setenv("NILSAMPLER_MAX_N", "2e9")
    co = compile_orbit(OrbitSpec(2, [(a, parse("t"))], n_start=10**9 - 5, n_end=10**9))
    assert len(all_points(co)[0]) == 6


def test_log_free_family_may_start_at_one():
    co = compile_orbit(OrbitSpec(2, [(GroupElement.circle("sqrt(2)"), parse("t^2"))], n_start=1, n_end=3))
    n, _ = all_points(co)
    assert list(n) == [1, 2, 3]


def test_budget_violation():
    co = compile_orbit(OrbitSpec(3, [(H(1, 1, 0), parse("t^4"))], n_start=2, n_end=10**6))
    with pytest.raises(NumericBudgetError):
        all_points(co)


def _random_spec(rng):
    dim = rng.randint(2, 4)
    a = GroupElement(dim, {p: Fraction(rng.randint(-40, 40), rng.randint(1, 9)) + Fraction(1, 7919)
                           for p in positions(dim)})
    gens = [(a, HardyExpr.monomial(Fraction(rng.randint(2, 7), 4), 0, Fraction(rng.randint(1, 9), rng.randint(1, 5))))]
    if rng.random() < 0.5:
        b = one_parameter_curve(a)(Fraction(rng.randint(-9, 9), 5))
        gens.append((b, parse(rng.choice(["t", "t^(1/2)", "t*log(t)"]))))
    polys = []
    if rng.random() < 0.5:
        c = GroupElement(dim, {(0, dim - 1): Fraction(rng.randint(1, 9), 3)})
        polys.append((c, parse("t^2/2 + t/2")))
    return OrbitSpec(dim, gens, polys, n_start=2, n_end=2000)


def test_compiled_matches_direct():
    rng = random.Random(10)
    for _ in range(50):
        spec = _random_spec(rng)
        co = compile_orbit(spec)
        ns = np.array(sorted(rng.sample(range(2, 2001), 20)))
        got = co.points(ns)
        for k, n in enumerate(ns):
            want = evaluate_direct(spec, int(n))
            for x, y in zip(got[k], want):
                assert circdist(x, y) < 1e-9


def _heis_oracle(x, y, f, ns):
    sq = {"x": x, "y": y}
    factors = [({(0, 1): sq["x"], (1, 2): sq["y"]}, f)]
    return [orbit_point(3, factors, n)[0] for n in ns]


@pytest.mark.parametrize("ftext, mpf, nmax", [
    ("t^2", lambda t: t**2, 10**3),
    ("t^(3/2)", lambda t: t**1.5, 10**6),
])
def test_precision_against_arbitrary_precision(ftext, mpf, nmax):
    rng = random.Random(12)
    spec = OrbitSpec(3, [(H("sqrt(2)", "sqrt(3)", 0), parse(ftext))], n_start=2, n_end=nmax)
    co = compile_orbit(spec)
    ns = sorted(rng.sample(range(nmax // 2, nmax + 1), 10))
    got = co.points(np.array(ns))
    want = _heis_oracle(mpmath.sqrt(2), mpmath.sqrt(3), mpf, ns)
    for g, w in zip(got, want):
        for a, b in zip(g, w):
            assert circdist(a, b) < 1e-10


def test_circle_t_cubed_reaches_1e18():
    ns = [10**6 - k for k in range(10)]
    co = compile_orbit(OrbitSpec(2, [(GroupElement.circle("sqrt(2)"), parse("t^3"))], n_end=10**6))
    got = co.points(np.array(ns))[:, 0]
    for g, n in zip(got, ns):
        want = float(mpmath.frac(mpmath.sqrt(2) * mpmath.mpf(n) ** 3))
        assert circdist(g, want) < 1e-10


def test_generation_is_deterministic_and_thread_independent():
    spec = OrbitSpec(3, [(H(1, "sqrt(2)", 0), parse("t^(3/2)"))], n_end=100_000)
    co = compile_orbit(spec)
    n1, x1 = all_points(co)
    n2, x2 = all_points(co, threads=4)
    assert np.array_equal(n1, n2) and np.array_equal(x1, x2)
    assert x1.tobytes() == all_points(co)[1].tobytes()


def test_progression_partition():
    spec = OrbitSpec(3, [(H(1, "sqrt(2)", 0), parse("t^(3/2)"))], n_end=5000)
    co = compile_orbit(spec)
    _, full = all_points(co)
    parts = [all_points(co, q=3, r=r)[1] for r in range(3)]
    merged = np.concatenate(parts)
    key = lambda a: a[np.lexsort(a.T[::-1])]
    assert np.array_equal(key(full), key(merged))


def test_weights_follow_scheme():
    spec = OrbitSpec(2, [(GroupElement.circle(1), parse("log(t)"))], n_start=2, n_end=50, scheme=LOG)
    ch = next(generate(compile_orbit(spec)))
    assert ch.weights == pytest.approx(np.log1p(1 / ch.n.astype(float)))


def test_spec_from_json():
    spec = spec_from_json({"group": {"name": "heisenberg"},
                           "generators": [{"element": {"heisenberg": [1, "sqrt(2)", 0]}, "exponent": "t^(3/2)"}],
                           "poly_parts": [{"element": {"heisenberg": [0, 0, 1]}, "polynomial": "t^2"}],
                           "range": [2, 100], "progression": [2, 1], "scheme": "log"})
    assert spec.dim == 3 and spec.q == 2 and spec.r == 1 and spec.scheme == LOG
    assert spec.poly_parts[0][1] == parse("t^2")
