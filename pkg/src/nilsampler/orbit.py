"""Orbit specifications v(n) = a_1^{f_1(n)} ... a_k^{f_k(n)} b_1^{p_1(n)} ... b_m^{p_m(n)}.

``compile`` multiplies the one-parameter curves of all generators once,
symbolically, giving each matrix entry as a polynomial in the scalar values
s_1 = f_1(n), ..., s_K = p_m(n).  ``generate`` then evaluates the scalars in
double-double, substitutes, reduces mod the lattice and streams fixed-size
chunks.  Chunk boundaries depend only on the range, so any thread count
produces the same chunks in the same order.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

from . import dd
from .errors import ConfigError, NonCommuting, NumericBudgetError, RangeError
from .hardy import HardyExpr, as_expr, compare, degree, evaluate_dd, evaluate_float, Growth, is_polynomial, poly_coefficients
from .nilgroup import GroupElement, check_commuting, element_from_json, one_parameter_curve, positions, \
    reduce_dd, reduce_exact
from .normal_form import check_property_p_w, normal_form
from .schemes import IDENTITY, WScheme, hardy_key, parse_scheme

log = logging.getLogger(__name__)

MAX_N = 10**8
MAGNITUDE_LIMIT = 1e20
CHUNK = 1 << 15

Poly = dict  # exponent tuple -> Fraction


def max_n() -> int:
    env = os.environ.get("NILSAMPLER_MAX_N")
    if env:
        try:
            v = int(float(env))
        except ValueError:
            raise ConfigError(f"NILSAMPLER_MAX_N={env!r} is not a number") from None
        if v != MAX_N:
            log.warning("range cap overridden by NILSAMPLER_MAX_N=%d; precision is only budgeted up to 1e8", v)
        return v
    return MAX_N


@dataclass
class OrbitSpec:
    dim: int
    generators: list  # (GroupElement, HardyExpr)
    poly_parts: list = field(default_factory=list)  # (GroupElement, polynomial HardyExpr)
    n_start: int = 2
    n_end: int = 1000
    q: int = 1
    r: int = 0
    scheme: WScheme = IDENTITY

    @property
    def elements(self) -> list[GroupElement]:
        return [g for g, _ in self.generators] + [b for b, _ in self.poly_parts]

    @property
    def scalars(self) -> list[HardyExpr]:
        return [f for _, f in self.generators] + [p for _, p in self.poly_parts]

    def indices(self) -> np.ndarray:
        first = self.n_start + ((self.r - self.n_start) % self.q)
        return np.arange(first, self.n_end + 1, self.q, dtype=np.int64)

    def with_progression(self, q: int, r: int) -> "OrbitSpec":
        return OrbitSpec(self.dim, self.generators, self.poly_parts, self.n_start, self.n_end, q, r, self.scheme)


@dataclass
class Diagnostic:
    name: str
    ok: bool
    detail: str = ""


def _has_log(fs: Sequence[HardyExpr]) -> bool:
    return any(x.beta != 0 for f in fs for x in f.terms)


def min_start(spec: OrbitSpec) -> int:
    """First admissible index: 2 when any log appears (scalars or weights), else 1."""
    base = 2 if _has_log(spec.scalars) else 1
    return max(base, spec.scheme.min_start)


def check_range(spec: OrbitSpec) -> None:
    lo = min_start(spec)
    if spec.n_start < lo:
        raise RangeError(f"n_start = {spec.n_start} but this family needs n >= {lo}")
    if spec.n_end < spec.n_start:
        raise RangeError(f"empty range [{spec.n_start}, {spec.n_end}]")
    cap = max_n()
    if spec.n_end > cap:
        raise RangeError(f"n_end = {spec.n_end} exceeds the cap {cap}")
    if spec.q < 1 or not (0 <= spec.r < spec.q):
        raise RangeError(f"bad progression (q, r) = ({spec.q}, {spec.r})")


def integer_valued(p: HardyExpr, samples: int = 64) -> bool:
    """p(Z) subset Z: p must be a polynomial whose binomial-basis coefficients are integers."""
    if not is_polynomial(p):
        return False
    cs = poly_coefficients(p)
    deg = len(cs) - 1

    def value(x):
        return sum((c * x**k for k, c in enumerate(cs)), Fraction(0))

    # Delta^k p(0) are the coefficients in the basis binom(t, k)
    vals = [value(x) for x in range(deg + 1)]
    for k in range(deg + 1):
        if vals[0].denominator != 1:
            return False
        vals = [b - a for a, b in zip(vals, vals[1:])]
    return all(value(x).denominator == 1 for x in range(-samples, samples + 1))


def validate(spec: OrbitSpec) -> list[Diagnostic]:
    """Advisory checks of the equidistribution hypotheses; never raises on failure."""
    out = []
    comm = check_commuting(spec.elements)
    out.append(Diagnostic("commuting", comm, "" if comm else "some pair of generators does not commute"))

    bad = [str(p) for _, p in spec.poly_parts if not integer_valued(p)]
    out.append(Diagnostic("G1_integer_valued", not bad, "; ".join(f"{p} is not integer-valued" for p in bad)))

    degs = [degree(p) for _, p in spec.poly_parts]
    g2 = all(d >= 1 for d in degs) and all(a < b for a, b in zip(degs, degs[1:])) \
        and (not degs or degs[-1] <= len(degs))
    out.append(Diagnostic("G2_poly_degrees", g2, f"degrees {degs}"))

    lo = min_start(spec)
    out.append(Diagnostic("n_start", spec.n_start >= lo, f"n_start = {spec.n_start}, needs >= {lo}"))

    fs = [f for _, f in spec.generators if not f.is_zero()]
    scheme = spec.scheme
    if fs:
        nf = normal_form(fs)
        g = [x for x in nf.g if not x.is_zero()]
        names = ", ".join(str(x) for x in g)
        g3 = all(compare(a, b).kind is Growth.STRICTLY_SLOWER for a, b in zip(g, g[1:]))
        out.append(Diagnostic("G3_growth_order", g3, f"normal-form basis [{names}]"))
        bad4 = []
        for x, l in zip(g, nf.ell):
            lower = (Fraction(l - 1),) + scheme.log_w_key()[1:]
            key = hardy_key(x.growth_key())
            if not (lower < key and x.growth_key() < (Fraction(l), 0)):
                bad4.append(str(x))
        out.append(Diagnostic(
            "G4_window", not bad4,
            f"t^(l-1) log W < g < t^l with W = {scheme.name}" + (f"; fails for {', '.join(bad4)}" if bad4 else ""),
        ))
        members = set(g)
        bad5 = [str(x) for x in g if degree(x) >= 2 and x.differentiate() not in members]
        out.append(Diagnostic("G5_derivative_closure", not bad5, "; ".join(bad5)))
        rep = check_property_p_w(fs, scheme)
        label = "property_P" if scheme == IDENTITY else "property_P_W"
        detail = ""
        if rep.witness is not None:
            w = rep.witness
            detail = (f"witness {w.combination} (orders {w.orders}, coefficients "
                      f"{[str(c) for c in w.coefficients]}): {w.classification}")
        out.append(Diagnostic(label, rep.holds, detail))
    return out


# ------------------------------------------------------------- polynomials

def _pmul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0) + ca * cb
    return {e: c for e, c in out.items() if c}


def _padd(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, 0) + c
    return {e: c for e, c in out.items() if c}


@dataclass
class CompiledOrbit:
    spec: OrbitSpec
    entries: dict  # position -> Poly in the scalars
    scalars: list
    precision: str = "extended"

    @property
    def dim(self) -> int:
        return self.spec.dim

    def scalar_values(self, ns: np.ndarray) -> list[dd.DD]:
        t = dd.from_float(ns.astype(np.float64))
        logt = dd.log(t) if _has_log(self.scalars) else None
        vals = []
        for f in self.scalars:
            if self.precision == "standard":
                # float64 scalars; the matrix algebra still runs in double-double
                hi = evaluate_float(f, ns.astype(np.float64))
                v = dd.DD(hi, np.zeros_like(hi))
            else:
                v = evaluate_dd(f, t, logt)
            if np.any(~np.isfinite(v.hi)) or np.any(np.abs(v.hi) > MAGNITUDE_LIMIT):
                raise NumericBudgetError(f"scalar {f} exceeds 1e20 on this range")
            vals.append(v)
        return vals

    def raw_entries(self, ns: np.ndarray) -> dict:
        """Matrix entries of v(n) before reduction, in double-double."""
        vals = self.scalar_values(ns)
        zero = np.zeros(len(ns))
        out = {}
        for pos, poly in self.entries.items():
            acc = dd.DD(zero, zero.copy())
            for expo, c in sorted(poly.items()):
                term = None
                for v, e in zip(vals, expo):
                    if e:
                        pw = dd.powi(v, e)
                        term = pw if term is None else dd.mul(term, pw)
                cd = dd.from_fraction(c)
                if term is None:
                    term = dd.DD(np.full(len(ns), cd.hi), np.full(len(ns), cd.lo))
                elif c != 1:
                    term = dd.mul(term, dd.DD(np.float64(cd.hi), np.float64(cd.lo)))
                if np.any(np.abs(term.hi) > MAGNITUDE_LIMIT):
                    raise NumericBudgetError(f"entry {pos[0] + 1},{pos[1] + 1} exceeds 1e20 before reduction")
                acc = dd.add(acc, term)
            out[pos] = acc
        return out

    def points(self, ns: np.ndarray) -> np.ndarray:
        """Reduced Mal'cev coordinates, one row per index."""
        red = reduce_dd(self.raw_entries(ns), self.dim)
        return np.column_stack([red[pos] for pos in positions(self.dim)]) if len(ns) else \
            np.zeros((0, len(positions(self.dim))))


def compile_orbit(spec: OrbitSpec, precision: str = "extended") -> CompiledOrbit:
    if precision not in ("standard", "extended"):
        raise ValueError(f"unknown precision {precision!r}")
    if not check_commuting(spec.elements):
        raise NonCommuting("generators do not pairwise commute; the product would depend on order")
    n = spec.dim
    K = len(spec.elements)
    one = tuple([0] * K)
    M = [[({one: Fraction(1)} if i == j else {}) for j in range(n)] for i in range(n)]
    for idx, g in enumerate(spec.elements):
        if g.dim != n:
            raise ConfigError(f"generator {idx + 1} has dim {g.dim}, group has dim {n}")
        curve = one_parameter_curve(g)
        C = [[({one: Fraction(1)} if i == j else {}) for j in range(n)] for i in range(n)]
        for (i, j), cs in curve.coeffs.items():
            C[i][j] = {tuple(k if v == idx else 0 for v in range(K)): c for k, c in enumerate(cs) if c}
        M = [[_sum_polys(_pmul(M[i][l], C[l][j]) for l in range(i, j + 1)) for j in range(n)] for i in range(n)]
    entries = {pos: M[pos[0]][pos[1]] for pos in positions(n)}
    return CompiledOrbit(spec, entries, spec.scalars, precision)


def _sum_polys(ps) -> Poly:
    out: Poly = {}
    for p in ps:
        out = _padd(out, p)
    return out


@dataclass
class Chunk:
    n: np.ndarray
    coords: np.ndarray
    weights: np.ndarray

    def torus(self, dim: int) -> np.ndarray:
        return self.coords[:, : dim - 1]


def chunk_bounds(count: int, size: int = CHUNK) -> list[tuple[int, int]]:
    return [(a, min(a + size, count)) for a in range(0, count, size)]


def generate(co: CompiledOrbit, n_start: Optional[int] = None, n_end: Optional[int] = None,
             q: Optional[int] = None, r: Optional[int] = None, threads: int = 1,
             chunk: int = CHUNK) -> Iterator[Chunk]:
    """Stream reduced points along qm + r inside [n_start, n_end], in index order."""
    s = co.spec
    spec = OrbitSpec(s.dim, s.generators, s.poly_parts,
                     s.n_start if n_start is None else n_start, s.n_end if n_end is None else n_end,
                     s.q if q is None else q, s.r if r is None else r, s.scheme)
    check_range(spec)
    ns = spec.indices()
    bounds = chunk_bounds(len(ns), chunk)

    def work(b):
        sl = ns[b[0]:b[1]]
        return Chunk(sl, co.points(sl), spec.scheme.weights(sl))

    if threads <= 1 or len(bounds) <= 1:
        for b in bounds:
            yield work(b)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map keeps submission order; the window bounds memory use
        window = 4 * threads
        for start in range(0, len(bounds), window):
            yield from pool.map(work, bounds[start:start + window])


def evaluate_direct(spec: OrbitSpec, n: int, reduce: bool = True):
    """Exact oracle path: scalars in double-double, then exact rational matrix algebra.

    Returns the reduced coordinates (floats) or, with ``reduce=False``, the
    exact Fraction entries of v(n) in Mal'cev order.
    """
    size = spec.dim
    m = [[Fraction(int(i == j)) for j in range(size)] for i in range(size)]
    for g, f in list(spec.generators) + list(spec.poly_parts):
        # same double-double scalar as the compiled path (n = 1 is allowed for log-free families)
        s = dd.to_fraction(evaluate_dd(f, dd.DD(np.float64(n), np.float64(0))))
        curve = one_parameter_curve(g)
        c = curve(s)
        cm = c.matrix()
        m = [[sum((m[i][l] * cm[l][j] for l in range(size)), Fraction(0)) for j in range(size)]
             for i in range(size)]
    if not reduce:
        return [m[i][j] for i, j in positions(size)]
    red, _ = reduce_exact(m, size)
    out = []
    for i, j in positions(size):
        x = float(red[i][j])
        out.append(0.0 if x >= 1.0 else x)
    return out


# -------------------------------------------------------------------- JSON

def spec_from_json(obj: dict) -> OrbitSpec:
    group = obj.get("group", {})
    if "heisenberg" in group or group.get("name") == "heisenberg":
        dim = 3
    else:
        dim = group.get("dim")
    gens = obj.get("generators", [])
    if dim is None:
        if not gens:
            raise ConfigError("cannot infer the group dimension")
        dim = element_from_json(gens[0]["element"]).dim
    dim = int(dim)
    generators = [(element_from_json(gd["element"], dim), as_expr(gd["exponent"])) for gd in gens]
    polys = []
    for pd in obj.get("poly_parts", []):
        expo = pd.get("exponent", pd.get("polynomial"))
        if expo is None:
            raise ConfigError("poly_parts entries need an 'exponent'")
        polys.append((element_from_json(pd["element"], dim), as_expr(expo)))
    rng = obj.get("range", [2, 1000])
    q, r = obj.get("progression", [1, 0])
    return OrbitSpec(dim, generators, polys, int(rng[0]), int(rng[1]), int(q), int(r),
                     parse_scheme(obj.get("scheme", "cesaro")))
