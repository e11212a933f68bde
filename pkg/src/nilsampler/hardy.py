"""Symbolic calculus on finite sums of terms c * t^alpha * (log t)^beta.

This span is a concrete Hardy field: closed under addition, products,
scalar multiples and d/dt, with growth decided lexicographically on
(alpha, beta) of the dominant term.  Coefficients and exponents are exact
Fractions.  Irrational constants enter as the exact value of their nearest
double-double (see :mod:`nilsampler.scalars`), so cancellation is decided
with an explicit relative tolerance of 2^-90.

Negative powers of log t are representable (``t/log(t)`` parses) but
antiderivatives of such terms leave the class, so integration refuses them.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Union

import mpmath
import numpy as np

from . import dd
from .errors import DomainError, ParseError, UnsupportedTerm, ZeroComparand
from .scalars import format_scalar, parse_scalar, round_to_dd

CANCEL_TOL = Fraction(1, 2**90)
T0 = 2

Number = Union[int, Fraction, float, str]


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else parse_scalar(x)


@dataclass(frozen=True, order=False)
class HardyTerm:
    coeff: Fraction
    alpha: Fraction
    beta: int = 0

    def __post_init__(self):
        object.__setattr__(self, "coeff", _frac(self.coeff))
        object.__setattr__(self, "alpha", _frac(self.alpha))
        if int(self.beta) != self.beta:
            raise ValueError("beta must be an integer")
        object.__setattr__(self, "beta", int(self.beta))
        if self.coeff == 0:
            raise ValueError("HardyTerm coefficient must be nonzero")

    @property
    def key(self) -> tuple[Fraction, int]:
        return (self.alpha, self.beta)

    def to_text(self) -> str:
        parts = []
        if self.alpha != 0:
            a = format_scalar(self.alpha)
            parts.append("t" if self.alpha == 1 else (f"t^{a}" if self.alpha.denominator == 1 and self.alpha > 0 else f"t^({a})"))
        if self.beta != 0:
            parts.append("log(t)" if self.beta == 1 else (f"log(t)^{self.beta}" if self.beta > 0 else f"log(t)^({self.beta})"))
        mono = "*".join(parts)
        sign = "-" if self.coeff < 0 else ""
        c = abs(self.coeff)
        if not mono:
            return sign + format_scalar(c)
        if c == 1:
            return sign + mono
        cs = format_scalar(c)
        if "/" in cs or "e" in cs:
            cs = f"({cs})"
        return f"{sign}{cs}*{mono}"


class HardyExpr:
    """Immutable normalised sum of HardyTerms, fastest-growing term first."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Iterable[HardyTerm] = ()):
        self.terms = _normalise(terms)
        self._hash = None

    # construction helpers
    @classmethod
    def const(cls, c: Number) -> "HardyExpr":
        c = _frac(c)
        return cls([HardyTerm(c, 0, 0)] if c != 0 else [])

    @classmethod
    def monomial(cls, alpha: Number = 1, beta: int = 0, coeff: Number = 1) -> "HardyExpr":
        coeff = _frac(coeff)
        return cls([HardyTerm(coeff, alpha, beta)] if coeff != 0 else [])

    @classmethod
    def parse(cls, text: str) -> "HardyExpr":
        return parse(text)

    # basic predicates
    def is_zero(self) -> bool:
        return not self.terms

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    @property
    def leading(self) -> HardyTerm:
        if not self.terms:
            raise ZeroComparand("the zero expression has no dominant term")
        return self.terms[0]

    def coefficient(self, alpha, beta=0) -> Fraction:
        key = (_frac(alpha), int(beta))
        for term in self.terms:
            if term.key == key:
                return term.coeff
        return Fraction(0)

    # arithmetic
    def __add__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return HardyExpr(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return HardyExpr(HardyTerm(-x.coeff, x.alpha, x.beta) for x in self.terms)

    def __sub__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, HardyExpr):
            return HardyExpr(
                HardyTerm(a.coeff * b.coeff, a.alpha + b.alpha, a.beta + b.beta)
                for a in self.terms
                for b in other.terms
            )
        try:
            c = _frac(other)
        except (ParseError, TypeError):
            return NotImplemented
        if c == 0:
            return HardyExpr()
        return HardyExpr(HardyTerm(x.coeff * c, x.alpha, x.beta) for x in self.terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, HardyExpr):
            return self * other.reciprocal()
        c = _frac(other)
        if c == 0:
            raise ZeroDivisionError("division of HardyExpr by zero")
        return self * (1 / c)

    def reciprocal(self) -> "HardyExpr":
        """1/f, available only when f is a single term."""
        if len(self.terms) != 1:
            raise UnsupportedTerm("only single-term expressions can be inverted inside the class")
        x = self.terms[0]
        return HardyExpr([HardyTerm(1 / x.coeff, -x.alpha, -x.beta)])

    def __pow__(self, r):
        r = _frac(r)
        if r.denominator == 1 and r >= 0:
            out = HardyExpr.const(1)
            for _ in range(int(r)):
                out = out * self
            return out
        if len(self.terms) != 1:
            raise UnsupportedTerm("non-integer powers need a single-term base")
        x = self.terms[0]
        if (x.beta * r).denominator != 1:
            raise UnsupportedTerm("power would leave integer exponents of log t")
        if r.denominator == 1:
            c = x.coeff ** int(r)
        else:
            if x.coeff < 0:
                raise UnsupportedTerm("fractional power of a negative coefficient")
            with mpmath.workprec(256):
                c = round_to_dd(
                    mpmath.power(mpmath.mpf(x.coeff.numerator) / x.coeff.denominator,
                                 mpmath.mpf(r.numerator) / r.denominator)
                )
        return HardyExpr([HardyTerm(c, x.alpha * r, int(x.beta * r))])

    def scale_t(self, a) -> "HardyExpr":
        """Multiply by t^a."""
        a = _frac(a)
        return HardyExpr(HardyTerm(x.coeff, x.alpha + a, x.beta) for x in self.terms)

    def __eq__(self, other):
        if isinstance(other, HardyExpr):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == HardyExpr.const(other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.terms)
        return self._hash

    def __repr__(self):
        return f"HardyExpr({self.to_text()!r})"

    def __str__(self):
        return self.to_text()

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        out = self.terms[0].to_text()
        for x in self.terms[1:]:
            s = x.to_text()
            out += " - " + s[1:] if s.startswith("-") else " + " + s
        return out

    # calculus
    def differentiate(self, n: int = 1) -> "HardyExpr":
        f = self
        for _ in range(n):
            out = []
            for x in f.terms:
                out.extend(d for d in (_d_alpha(x), _d_beta(x)) if d is not None)
            f = HardyExpr(out)
        return f

    def integrate(self) -> "HardyExpr":
        """Antiderivative with no constant term."""
        out = []
        for x in self.terms:
            out.extend(_integrate_term(x))
        return HardyExpr(out)

    # growth
    def growth_key(self) -> tuple[Fraction, int]:
        return self.leading.key

    def degree(self) -> int:
        return degree(self)

    def is_bounded(self) -> bool:
        return is_bounded(self)

    def polynomial_part(self):
        return polynomial_part(self)

    def evaluate(self, t, precision: str = "extended"):
        return evaluate(self, t, precision)


def _d_alpha(x: HardyTerm):
    if x.alpha == 0:
        return None
    return HardyTerm(x.coeff * x.alpha, x.alpha - 1, x.beta)


def _d_beta(x: HardyTerm):
    if x.beta == 0:
        return None
    return HardyTerm(x.coeff * x.beta, x.alpha - 1, x.beta - 1)


def _integrate_term(x: HardyTerm) -> list[HardyTerm]:
    if x.beta < 0:
        raise UnsupportedTerm(f"no antiderivative in the class for {x.to_text()}")
    if x.alpha == -1:
        return [HardyTerm(x.coeff / (x.beta + 1), 0, x.beta + 1)]
    a = x.alpha + 1
    # int t^alpha L^b = t^a sum_j (-1)^j b!/(b-j)! L^(b-j) / a^(j+1)
    out = []
    falling = 1
    for j in range(x.beta + 1):
        if j:
            falling *= x.beta - j + 1
        c = x.coeff * (-1) ** j * falling / a ** (j + 1)
        out.append(HardyTerm(c, a, x.beta - j))
    return out


def _coerce(v) -> Optional[HardyExpr]:
    if isinstance(v, HardyExpr):
        return v
    if isinstance(v, (int, Fraction, float, str)) and not isinstance(v, bool):
        return HardyExpr.const(v)
    return None


def _normalise(terms: Iterable[HardyTerm]) -> tuple[HardyTerm, ...]:
    sums: dict[tuple[Fraction, int], Fraction] = {}
    scale: dict[tuple[Fraction, int], Fraction] = {}
    for x in terms:
        if not isinstance(x, HardyTerm):
            raise TypeError(f"expected HardyTerm, got {type(x).__name__}")
        k = x.key
        sums[k] = sums.get(k, 0) + x.coeff
        scale[k] = max(scale.get(k, 0), abs(x.coeff))
    out = []
    for k, c in sums.items():
        if c == 0 or abs(c) <= CANCEL_TOL * scale[k]:
            continue
        out.append(HardyTerm(c, k[0], k[1]))
    out.sort(key=lambda x: x.key, reverse=True)
    return tuple(out)


def add(f: HardyExpr, g: HardyExpr) -> HardyExpr:
    return f + g


def differentiate(f: HardyExpr, n: int = 1) -> HardyExpr:
    return f.differentiate(n)


def integrate(f: HardyExpr) -> HardyExpr:
    return f.integrate()


class Growth(enum.Enum):
    STRICTLY_SLOWER = "StrictlySlower"
    STRICTLY_FASTER = "StrictlyFaster"
    SAME_ORDER = "SameOrder"
    EQUAL = "Equal"


@dataclass(frozen=True)
class GrowthRelation:
    kind: Growth
    # lim f/g for SameOrder (and 1 for Equal)
    limit: Optional[Fraction] = None

    def __str__(self):
        if self.kind is Growth.SAME_ORDER:
            return f"SameOrder({format_scalar(self.limit)})"
        return self.kind.value


def compare(f: HardyExpr, g: HardyExpr) -> GrowthRelation:
    if f.is_zero() or g.is_zero():
        raise ZeroComparand("compare needs two nonzero expressions")
    if f == g:
        return GrowthRelation(Growth.EQUAL, Fraction(1))
    kf, kg = f.growth_key(), g.growth_key()
    if kf < kg:
        return GrowthRelation(Growth.STRICTLY_SLOWER)
    if kf > kg:
        return GrowthRelation(Growth.STRICTLY_FASTER)
    return GrowthRelation(Growth.SAME_ORDER, f.leading.coeff / g.leading.coeff)


def limit_ratio(f: HardyExpr, g: HardyExpr):
    """lim f/g: a Fraction, or +/- inf."""
    if g.is_zero():
        raise ZeroComparand("limit_ratio needs a nonzero denominator")
    if f.is_zero():
        return Fraction(0)
    rel = compare(f, g)
    if rel.kind is Growth.STRICTLY_SLOWER:
        return Fraction(0)
    if rel.kind is Growth.STRICTLY_FASTER:
        sign = (f.leading.coeff > 0) == (g.leading.coeff > 0)
        return math.inf if sign else -math.inf
    return rel.limit


def is_bounded(f: HardyExpr) -> bool:
    return f.is_zero() or f.growth_key() <= (0, 0)


def degree(f: HardyExpr) -> int:
    if is_bounded(f):
        return 0
    alpha, beta = f.growth_key()
    if beta <= 0:
        d = math.ceil(alpha)
    else:
        d = math.floor(alpha) + 1
    return max(d, 1)


def polynomial_part(f: HardyExpr) -> tuple[HardyExpr, HardyExpr]:
    poly, rest = [], []
    for x in f.terms:
        if x.beta == 0 and x.alpha.denominator == 1 and x.alpha >= 0:
            poly.append(x)
        else:
            rest.append(x)
    return HardyExpr(poly), HardyExpr(rest)


def is_polynomial(f: HardyExpr) -> bool:
    return polynomial_part(f)[1].is_zero()


def poly_coefficients(f: HardyExpr) -> list[Fraction]:
    """Coefficients [c0, c1, ...] of a polynomial expression."""
    p, r = polynomial_part(f)
    if not r.is_zero():
        raise UnsupportedTerm(f"{f} is not a polynomial")
    if p.is_zero():
        return []
    deg = int(p.terms[0].alpha)
    out = [Fraction(0)] * (deg + 1)
    for x in p.terms:
        out[int(x.alpha)] = x.coeff
    return out


# ---------------------------------------------------------------- numerics

_ROOT_MAX_Q = 64


def _power_dd(t: dd.DD, logt: Optional[dd.DD], alpha: Fraction) -> dd.DD:
    if alpha.denominator == 1:
        return dd.powi(t, int(alpha))
    if alpha.denominator <= _ROOT_MAX_Q and abs(alpha.numerator) <= 4 * _ROOT_MAX_Q:
        return dd.powi(dd.root(t, alpha.denominator), alpha.numerator)
    return dd.exp(dd.mul(dd.from_fraction(alpha), logt))


def _needs_log(f: HardyExpr) -> bool:
    return any(
        x.beta != 0
        or (x.alpha.denominator != 1
            and (x.alpha.denominator > _ROOT_MAX_Q or abs(x.alpha.numerator) > 4 * _ROOT_MAX_Q))
        for x in f.terms
    )


def evaluate_dd(f: HardyExpr, t: dd.DD, logt: Optional[dd.DD] = None) -> dd.DD:
    """Vectorised double-double evaluation at an array of points t >= 2."""
    hi = np.asarray(t.hi, dtype=np.float64)
    zero = np.zeros_like(hi)
    acc = dd.DD(zero, zero.copy())
    if f.is_zero():
        return acc
    if logt is None and _needs_log(f):
        logt = dd.log(t)
    powers: dict[Fraction, dd.DD] = {}
    logs: dict[int, dd.DD] = {}
    # sum from smallest to largest term
    for x in reversed(f.terms):
        if x.alpha not in powers:
            powers[x.alpha] = _power_dd(t, logt, x.alpha)
        v = powers[x.alpha]
        if x.beta:
            if x.beta not in logs:
                logs[x.beta] = dd.powi(logt, x.beta)
            v = dd.mul(v, logs[x.beta])
        c = dd.from_fraction(x.coeff)
        v = dd.mul(v, dd.DD(np.full_like(hi, c.hi), np.full_like(hi, c.lo)))
        acc = dd.add(acc, v)
    return acc


def evaluate_float(f: HardyExpr, t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    if f.is_zero():
        return out
    logt = np.log(t)
    for x in reversed(f.terms):
        v = np.power(t, float(x.alpha)) if x.alpha else np.ones_like(t)
        if x.beta:
            v = v * logt ** x.beta
        out = out + float(x.coeff) * v
    return out


def evaluate(f: HardyExpr, t, precision: str = "extended"):
    """Value of f at a single point t >= 2.

    ``precision="standard"`` returns a float computed in float64.
    ``precision="extended"`` works in double-double and returns the exact
    value of the double-double result as a Fraction (about 106 bits).
    """
    if isinstance(t, str):
        t = parse_scalar(t)
    if t < T0:
        raise DomainError(f"t = {t} lies outside [2, oo)")
    if precision == "standard":
        return float(evaluate_float(f, float(t)))
    if precision != "extended":
        raise ValueError(f"unknown precision {precision!r}")
    td = dd.from_fraction(Fraction(t))
    res = evaluate_dd(f, dd.DD(np.float64(td.hi), np.float64(td.lo)))
    return dd.to_fraction(res)


# ------------------------------------------------------------------ parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)|(?P<op>\*\*|[-+*/^(){}\[\],]))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r} at {pos} in {text!r}")
        kind = m.lastgroup
        val = m.group(kind)
        if val == "**":
            val = "^"
        out.append((kind, val))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


_CLOSE = {"(": ")", "{": "}", "[": "]"}
_CONST_FUNCS = {"sqrt", "exp", "log", "sin", "cos"}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, val=None):
        tok = self.peek()
        if tok[0] is None or (val is not None and tok[1] != val):
            raise ParseError(f"expected {val or 'token'} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self) -> HardyExpr:
        if not self.toks:
            raise ParseError("empty expression")
        e = self.expr()
        if self.i != len(self.toks):
            raise ParseError(f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return e

    def expr(self) -> HardyExpr:
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> HardyExpr:
        e = self.unary()
        while True:
            tok = self.peek()
            if tok[1] in ("*", "/"):
                self.take()
                rhs = self.unary()
                e = e * rhs if tok[1] == "*" else e / rhs
            elif tok[0] in ("name", "num") or tok[1] in _CLOSE:
                # implicit product such as "2t" or "t log(t)"
                e = e * self.unary()
            else:
                return e

    def unary(self) -> HardyExpr:
        if self.peek()[1] == "-":
            self.take()
            return -self.unary()
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> HardyExpr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            r = self.exponent()
            try:
                return base ** r
            except UnsupportedTerm as exc:
                raise ParseError(str(exc)) from None
        return base

    def exponent(self) -> Fraction:
        tok = self.peek()
        if tok[1] == "-":
            self.take()
            return -self.exponent()
        if tok[1] in _CLOSE:
            e = self._group()
            if not (e.is_zero() or (len(e.terms) == 1 and e.terms[0].key == (0, 0))):
                raise ParseError("exponent must be a constant")
            return e.terms[0].coeff if e.terms else Fraction(0)
        if tok[0] == "num":
            self.take()
            return Fraction(tok[1])
        if tok[0] == "name":
            e = self.atom()
            if not (len(e.terms) == 1 and e.terms[0].key == (0, 0)):
                raise ParseError("exponent must be a constant")
            return e.terms[0].coeff
        raise ParseError(f"bad exponent in {self.text!r}")

    def _group(self) -> HardyExpr:
        open_ = self.take()[1]
        e = self.expr()
        self.take(_CLOSE[open_])
        return e

    def atom(self) -> HardyExpr:
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return HardyExpr.const(Fraction(val))
        if val in _CLOSE:
            return self._group()
        if kind == "name":
            self.take()
            if val == "t":
                return HardyExpr.monomial(1, 0)
            if val in ("pi", "e"):
                return HardyExpr.const(parse_scalar(val))
            if val in _CONST_FUNCS:
                # "log t" without brackets applies to the next power term
                arg = self._group() if self.peek()[1] in _CLOSE else self.power()
                if val == "log" and arg == HardyExpr.monomial(1, 0):
                    return HardyExpr.monomial(0, 1)
                if val == "log" and arg.is_monomial() and arg.terms[0].beta == 0 \
                        and arg.terms[0].coeff == 1 and arg.terms[0].alpha != 0:
                    # log(t^a) = a log t
                    return HardyExpr.monomial(0, 1, arg.terms[0].alpha)
                if val == "sqrt" and not (len(arg.terms) == 1 and arg.terms[0].key == (0, 0)):
                    return arg ** Fraction(1, 2)
                if not (arg.is_zero() or (len(arg.terms) == 1 and arg.terms[0].key == (0, 0))):
                    raise ParseError(f"{val}() of a non-constant is outside the term class")
                c = arg.terms[0].coeff if arg.terms else Fraction(0)
                return HardyExpr.const(parse_scalar(f"{val}({c.numerator}/{c.denominator})"))
            raise ParseError(f"unknown name {val!r} in {self.text!r}")
        raise ParseError(f"unexpected {val!r} in {self.text!r}")


def parse(text: str) -> HardyExpr:
    """Parse text like ``t^{3/2} + 2*t + 1`` or ``sqrt(2)*t*log(t)``."""
    if not isinstance(text, str):
        raise ParseError("expression text must be a string")
    return _Parser(text).parse()


def as_expr(v) -> HardyExpr:
    if isinstance(v, HardyExpr):
        return v
    if isinstance(v, str):
        return parse(v)
    return HardyExpr.const(v)
