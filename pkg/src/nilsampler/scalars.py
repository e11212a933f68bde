"""Parsing of real constants such as ``3/2``, ``sqrt(2)`` or ``(sqrt(5)-1)/2``.

Rational input stays an exact :class:`~fractions.Fraction`.  Anything
irrational is evaluated with mpmath at 256 bits and rounded to the nearest
double-double, whose exact value is then stored as a Fraction.  This keeps
symbolic arithmetic exact on what was actually stored.
"""
from __future__ import annotations

import ast
import math
from fractions import Fraction
from numbers import Rational
from typing import Union

import mpmath

from .errors import ParseError

Scalar = Union[int, float, str, Fraction]

_FUNCS = {
    "sqrt": mpmath.sqrt,
    "exp": mpmath.exp,
    "log": mpmath.log,
    "sin": mpmath.sin,
    "cos": mpmath.cos,
}
_CONSTS = {"pi": lambda: mpmath.pi, "e": lambda: mpmath.e}


def round_to_dd(x) -> Fraction:
    """Exact value of the double-double nearest to ``x`` (an mpmath number or a Fraction)."""
    if isinstance(x, (Fraction, int)):
        x = Fraction(x)
        hi = float(x)
        lo = float(x - Fraction(hi))
        return Fraction(hi) + Fraction(lo)
    hi = float(x)
    lo = float(x - mpmath.mpf(hi))
    return Fraction(hi) + Fraction(lo)


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        if isinstance(node.value, float):
            raise ParseError("float literal must be parsed from source text")
        return Fraction(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a, b = _eval(node.left), _eval(node.right)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        if isinstance(node.op, ast.Mult):
            return a * b
        if isinstance(node.op, ast.Div):
            return a / b
        if isinstance(node.op, ast.Pow):
            if isinstance(b, Fraction) and b.denominator == 1 and isinstance(a, Fraction):
                return a ** int(b)
            return _mp(a) ** _mp(b)
    if isinstance(node, ast.Name) and node.id in _CONSTS:
        return _CONSTS[node.id]()
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
        if len(node.args) != 1 or node.keywords:
            raise ParseError(f"{node.func.id} takes one argument")
        return _FUNCS[node.func.id](_mp(_eval(node.args[0])))
    raise ParseError(f"unsupported syntax in constant: {ast.dump(node)}")


def _mp(v):
    if isinstance(v, Fraction):
        return mpmath.mpf(v.numerator) / v.denominator
    return v


def _decimal_literals_to_fractions(text: str) -> str:
    # ast would turn 0.1 into a binary float; rewrite decimals as Fraction calls
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isdigit() or (ch == "." and i + 1 < len(text) and text[i + 1].isdigit()):
            j = i
            while j < len(text) and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < len(text) and text[j] in "eE" and j + 1 < len(text) and (
                text[j + 1].isdigit() or text[j + 1] in "+-"
            ):
                j += 2
                while j < len(text) and text[j].isdigit():
                    j += 1
            lit = Fraction(text[i:j])
            out.append(f"({lit.numerator}/{lit.denominator})")
            i = j
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def parse_scalar(value: Scalar) -> Fraction:
    """Turn a JSON/CLI scalar into an exact Fraction (see module docstring)."""
    if isinstance(value, bool):
        raise ParseError("booleans are not scalars")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ParseError(f"non-finite scalar {value!r}")
        return Fraction(value)
    if not isinstance(value, str):
        raise ParseError(f"cannot interpret {value!r} as a real number")
    text = value.strip().replace("^", "**")
    if not text:
        raise ParseError("empty scalar")
    try:
        tree = ast.parse(_decimal_literals_to_fractions(text), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"bad scalar {value!r}: {exc.msg}") from None
    with mpmath.workprec(256):
        try:
            result = _eval(tree)
        except ZeroDivisionError:
            raise ParseError(f"division by zero in {value!r}") from None
        if isinstance(result, Fraction):
            return result
        if not mpmath.isfinite(result) or isinstance(result, mpmath.mpc):
            raise ParseError(f"{value!r} is not a finite real number")
        return round_to_dd(result)


def format_scalar(q: Fraction) -> str:
    """Short text for a Fraction; long dd-derived values print as decimals."""
    if q.denominator == 1:
        return str(q.numerator)
    if q.denominator <= 10**6:
        return f"{q.numerator}/{q.denominator}"
    with mpmath.workprec(128):
        return mpmath.nstr(mpmath.mpf(q.numerator) / q.denominator, 34)
