"""Upper unitriangular groups, the integer lattice, and Mal'cev coordinates.

Group elements hold their strictly-upper entries as double-double values,
stored as the exact Fractions those double-doubles represent.  Products,
inverses, exp and log are computed exactly on those Fractions and rounded
once at the end, so group axioms hold to ~2^-104 relative.

Coordinates on X = G/Gamma are the entries of the representative g*gamma
whose strictly-upper entries all lie in [0, 1), listed superdiagonal by
superdiagonal: (1,2), (2,3), ..., then (1,3), (2,4), ..., up to (1,n).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np

from . import dd
from .errors import ConfigError, DimMismatch
from .scalars import format_scalar, parse_scalar

COMMUTE_TOL = Fraction(1, 2**80)


def positions(n: int) -> list[tuple[int, int]]:
    """0-based strictly-upper positions in Mal'cev order."""
    return [(i, i + k) for k in range(1, n) for i in range(n - k)]


def _round(q: Fraction) -> Fraction:
    return dd.to_fraction(dd.from_fraction(q))


def _identity(n):
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def _matmul(a, b, n):
    return [
        [
            sum((a[i][k] * b[k][j] for k in range(i, j + 1)), Fraction(0)) if j >= i else Fraction(0)
            for j in range(n)
        ]
        for i in range(n)
    ]


class GroupElement:
    """Unitriangular n x n matrix with double-double strictly-upper entries."""

    __slots__ = ("dim", "_m")

    def __init__(self, dim: int, entries: Mapping[tuple[int, int], object] = (), exact: bool = False):
        if dim < 2:
            raise ValueError("dimension must be at least 2")
        self.dim = dim
        m = _identity(dim)
        items = entries.items() if isinstance(entries, Mapping) else entries
        for (i, j), v in items:
            if not (0 <= i < j < dim):
                raise ValueError(f"position {(i, j)} is not strictly upper for dim {dim}")
            q = v if isinstance(v, Fraction) else parse_scalar(v)
            m[i][j] = q if exact else _round(q)
        self._m = tuple(tuple(r) for r in m)

    @classmethod
    def _from_matrix(cls, m, dim, exact=False):
        return cls(dim, {(i, j): m[i][j] for i in range(dim) for j in range(i + 1, dim) if m[i][j]}, exact)

    @classmethod
    def identity(cls, dim: int) -> "GroupElement":
        return cls(dim)

    @classmethod
    def heisenberg(cls, x, y, z) -> "GroupElement":
        return cls(3, {(0, 1): x, (1, 2): y, (0, 2): z})

    @classmethod
    def circle(cls, x) -> "GroupElement":
        return cls(2, {(0, 1): x})

    def entry(self, i: int, j: int) -> Fraction:
        return self._m[i][j]

    def matrix(self) -> list[list[Fraction]]:
        return [list(r) for r in self._m]

    def to_float(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self._m])

    def coords(self) -> list[Fraction]:
        return [self._m[i][j] for i, j in positions(self.dim)]

    def is_integral(self) -> bool:
        return all(x.denominator == 1 for x in self.coords())

    def _check(self, other):
        if not isinstance(other, GroupElement):
            raise TypeError("expected a GroupElement")
        if other.dim != self.dim:
            raise DimMismatch(f"dimensions {self.dim} and {other.dim} differ")

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        self._check(other)
        exact = self.is_integral() and other.is_integral()
        return GroupElement._from_matrix(_matmul(self._m, other._m, self.dim), self.dim, exact)

    def inverse(self) -> "GroupElement":
        # (I + N)^-1 = sum_k (-N)^k, finite since N^n = 0
        n = self.dim
        N = [[self._m[i][j] if j > i else Fraction(0) for j in range(n)] for i in range(n)]
        acc = _identity(n)
        power = _identity(n)
        for _ in range(1, n):
            power = _matmul(power, N, n)
            power = [[-x for x in r] for r in power]
            acc = [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(acc, power)]
        return GroupElement._from_matrix(acc, n, self.is_integral())

    def __eq__(self, other):
        return isinstance(other, GroupElement) and self.dim == other.dim and self._m == other._m

    def __hash__(self):
        return hash((self.dim, self._m))

    def __repr__(self):
        vals = ", ".join(f"{i + 1},{j + 1}:{float(self._m[i][j]):.17g}" for i, j in positions(self.dim))
        return f"GroupElement(dim={self.dim}, {vals})"

    def max_abs_diff(self, other: "GroupElement") -> Fraction:
        self._check(other)
        return max(abs(a - b) for a, b in zip(self.coords(), other.coords()))


def mul(g: GroupElement, h: GroupElement) -> GroupElement:
    return g * h


def inverse(g: GroupElement) -> GroupElement:
    return g.inverse()


def commutator(g: GroupElement, h: GroupElement) -> GroupElement:
    g._check(h)
    n = g.dim
    gi, hi = g.inverse(), h.inverse()
    m = _matmul(_matmul(_matmul(g._m, h._m, n), gi._m, n), hi._m, n)
    return GroupElement._from_matrix(m, n)


def check_commuting(elements: Sequence[GroupElement]) -> bool:
    for a in range(len(elements)):
        for b in range(a + 1, len(elements)):
            c = commutator(elements[a], elements[b])
            if any(abs(x) > COMMUTE_TOL for x in c.coords()):
                return False
    return True


# --------------------------------------------------------------- exp and log

def log_nilpotent(g: GroupElement) -> list[list[Fraction]]:
    """log g = sum_{k<n} (-1)^(k+1) (g - I)^k / k, as an exact strictly-upper matrix."""
    n = g.dim
    N = [[g.entry(i, j) if j > i else Fraction(0) for j in range(n)] for i in range(n)]
    acc = [[Fraction(0)] * n for _ in range(n)]
    power = _identity(n)
    for k in range(1, n):
        power = _matmul(power, N, n)
        sign = Fraction((-1) ** (k + 1), k)
        acc = [[a + sign * b for a, b in zip(ra, rb)] for ra, rb in zip(acc, power)]
    return acc


def exp_nilpotent(M: Sequence[Sequence]) -> GroupElement:
    n = len(M)
    M = [[Fraction(x) if not isinstance(x, Fraction) else x for x in r] for r in M]
    if any(len(r) != n for r in M):
        raise DimMismatch("exp_nilpotent needs a square matrix")
    if any(M[i][j] for i in range(n) for j in range(i + 1)):
        raise ValueError("exp_nilpotent needs a strictly upper triangular matrix")
    acc = _identity(n)
    power = _identity(n)
    for k in range(1, n):
        power = _matmul(power, M, n)
        f = Fraction(1, math.factorial(k))
        acc = [[a + f * b for a, b in zip(ra, rb)] for ra, rb in zip(acc, power)]
    return GroupElement._from_matrix(acc, n)


# ------------------------------------------------------- one-parameter curves

@dataclass(frozen=True)
class OneParameterCurve:
    """curve(s) = exp(s log a); entry (i, j) is sum_k coeffs[(i, j)][k] s^k."""

    dim: int
    coeffs: Mapping[tuple[int, int], tuple[Fraction, ...]]

    def __call__(self, s) -> GroupElement:
        s = s if isinstance(s, Fraction) else parse_scalar(s)
        vals = {}
        for pos, cs in self.coeffs.items():
            vals[pos] = sum((c * s**k for k, c in enumerate(cs)), Fraction(0))
        return GroupElement(self.dim, vals, exact=True)

    def degree(self) -> int:
        return max((len(cs) - 1 for cs in self.coeffs.values() if any(cs)), default=0)


def one_parameter_curve(a: GroupElement) -> OneParameterCurve:
    n = a.dim
    L = log_nilpotent(a)
    coeffs = {pos: [Fraction(0)] * n for pos in positions(n)}
    power = _identity(n)
    for k in range(1, n):
        power = _matmul(power, L, n)
        f = Fraction(1, math.factorial(k))
        for i, j in positions(n):
            coeffs[(i, j)][k] += f * power[i][j]
    trimmed = {}
    for pos, cs in coeffs.items():
        while cs and cs[-1] == 0:
            cs.pop()
        trimmed[pos] = tuple(cs)
    return OneParameterCurve(n, trimmed)


# ---------------------------------------------------------------- reduction

@dataclass(frozen=True)
class MalcevCoords:
    dim: int
    values: tuple[float, ...]

    def torus(self) -> tuple[float, ...]:
        return torus_projection(self)


def reduce_exact(m: list[list[Fraction]], n: int):
    """Sweep reduction on an exact matrix; returns (reduced matrix, gamma matrix)."""
    m = [list(r) for r in m]
    gamma = _identity(n)
    for i, j in positions(n):
        c = math.floor(m[i][j])
        if c:
            # right-multiply by I - c e_ij: column j -= c * column i
            for a in range(i + 1):
                m[a][j] -= c * m[a][i]
            for a in range(n):
                gamma[a][j] -= c * gamma[a][i]
    return m, gamma


def reduce_mod_lattice(g: GroupElement) -> tuple[MalcevCoords, GroupElement]:
    """Coordinates of the representative g*gamma in [0,1)^(n(n-1)/2), and gamma."""
    n = g.dim
    red, gamma = reduce_exact(g.matrix(), n)
    vals = []
    for i, j in positions(n):
        x = float(red[i][j])
        vals.append(0.0 if x >= 1.0 else x)
    return MalcevCoords(n, tuple(vals)), GroupElement._from_matrix(gamma, n, exact=True)


def reduce_dd(entries: Mapping[tuple[int, int], dd.DD], n: int) -> dict[tuple[int, int], np.ndarray]:
    """Vectorised reduction of arrays of matrices given entrywise in double-double."""
    m = {pos: dd.DD(np.asarray(v.hi, dtype=np.float64), np.asarray(v.lo, dtype=np.float64))
         for pos, v in entries.items()}
    out = {}
    for i, j in positions(n):
        v = m[(i, j)]
        c = dd.floor(v)
        f = dd.sub(v, c)
        m[(i, j)] = f
        # column j -= c * column i, rows above i (row i itself is the entry just floored)
        for a in range(i):
            m[(a, j)] = dd.sub(m[(a, j)], dd.mul(c, m[(a, i)]))
        x = np.asarray(f.hi + f.lo, dtype=np.float64)
        out[(i, j)] = np.where((x >= 1.0) | (x < 0.0), 0.0, x)
    return out


def torus_projection(c: MalcevCoords) -> tuple[float, ...]:
    return tuple(c.values[: c.dim - 1])


def nilpotency_step(dim: int) -> int:
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    return dim - 1


def degree_upper_bound(s: int, M: int) -> int:
    """Upper bound (s+1)(M+1) on the filtration degree of v; not the exact minimum."""
    if s < 1 or M < 1:
        raise ValueError("need s >= 1 and M >= 1")
    return (s + 1) * (M + 1)


# -------------------------------------------------------------------- JSON

def element_from_json(obj, dim: Optional[int] = None) -> GroupElement:
    if isinstance(obj, GroupElement):
        return obj
    if not isinstance(obj, Mapping):
        raise ConfigError(f"group element must be an object, got {obj!r}")
    if "heisenberg" in obj:
        xyz = obj["heisenberg"]
        if len(xyz) != 3:
            raise ConfigError("heisenberg shorthand needs [x, y, z]")
        g = GroupElement.heisenberg(*xyz)
    else:
        n = obj.get("dim", dim)
        if n is None:
            raise ConfigError("group element needs a dim")
        entries = {}
        for key, v in obj.get("entries", {}).items():
            try:
                i, j = (int(x) for x in key.split(","))
            except ValueError:
                raise ConfigError(f"bad entry key {key!r}; expected 'i,j'") from None
            entries[(i - 1, j - 1)] = v
        try:
            g = GroupElement(int(n), entries)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if dim is not None and g.dim != dim:
        raise DimMismatch(f"element has dim {g.dim}, group has dim {dim}")
    return g


def element_to_json(g: GroupElement) -> dict:
    return {
        "dim": g.dim,
        "entries": {f"{i + 1},{j + 1}": format_scalar(g.entry(i, j)) for i, j in positions(g.dim) if g.entry(i, j)},
    }
