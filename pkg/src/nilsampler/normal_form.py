"""Normal forms of finite families in the Hardy term class, and Property (P)/(P_W).

Every expression is split as f = P + E + Z: P the polynomial terms, Z the
terms tending to 0 (dominant key below (0, 0)), E the rest ("essential"
part).  The inductions below run on essential parts only, so the residual
f - sum(lambda g) - p of each row is exactly its own Z, which tends to 0.

Derivative closure differs from the textbook induction in one place.
Replacing f_k by f_k' and integrating back loses terms of f_k of degree
<= 1 (for f_k = t^{3/2} + t^{1/2}, the t^{-1/2} in f_k' is vanishing, yet
its antiderivative is not).  We therefore split f_k = A + B, with A the
terms of degree >= 2 and B the rest, and recurse on {f_i - eta_i f_k, A', B}.
A' has no vanishing terms, so integrating its normal form is exact; B has
degree <= 1 and needs no derivative.  The characteristic pair still drops.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import EmptyInput, NoSchemeFound, UnsupportedTerm
from .hardy import HardyExpr, compare, degree, Growth, polynomial_part
from .schemes import CATALOGUE, IDENTITY, WScheme, hardy_key

ZERO_KEY = (Fraction(0), 0)


@dataclass(frozen=True, order=True)
class CharacteristicPair:
    d: int
    e: int


@dataclass
class NormalForm:
    g: list[HardyExpr]
    lam: list[list[Fraction]]
    p: list[HardyExpr]
    ell: list[int]

    def residual(self, fs: Sequence[HardyExpr]) -> list[HardyExpr]:
        out = []
        for f, row, p in zip(fs, self.lam, self.p):
            r = f - p
            for c, g in zip(row, self.g):
                if c:
                    r = r - g * c
            out.append(r)
        return out


@dataclass
class PropertyWitness:
    coefficients: list[Fraction]
    orders: list[int]
    combination: HardyExpr
    non_polynomial: HardyExpr
    classification: str


@dataclass
class PropertyReport:
    holds: bool
    scheme: WScheme = IDENTITY
    witness: Optional[PropertyWitness] = None


def split_parts(f: HardyExpr):
    """(P, E, Z): polynomial, essential and vanishing parts of f."""
    P, rest = polynomial_part(f)
    E = HardyExpr(x for x in rest.terms if x.key > ZERO_KEY)
    Z = HardyExpr(x for x in rest.terms if x.key < ZERO_KEY)
    return P, E, Z


def characteristic_pair(fs: Sequence[HardyExpr]) -> CharacteristicPair:
    if not fs:
        raise EmptyInput("characteristic pair of an empty family")
    degs = [degree(f) for f in fs]
    d = max(degs)
    return CharacteristicPair(d, degs.count(d))


def _ell(g: HardyExpr) -> int:
    # for essential g, t^(l-1) < g < t^l holds with l = deg g
    return degree(g)


def _fastest_index(fs: Sequence[HardyExpr]) -> int:
    best = None
    for i, f in enumerate(fs):
        if f.is_zero():
            continue
        if best is None or f.growth_key() >= fs[best].growth_key():
            best = i
    return best


def _eta(f: HardyExpr, top: HardyExpr) -> Fraction:
    if f.is_zero() or f.growth_key() != top.growth_key():
        return Fraction(0)
    return f.leading.coeff / top.leading.coeff


# ---------------------------------------------------------- simple normal form

def _snf_essential(es: list[HardyExpr], trace):
    """Induction on essential parts; returns (g, lam) with g fastest last."""
    k = len(es)
    if all(e.is_zero() for e in es):
        return [], [[] for _ in range(k)]
    if trace is not None:
        trace.append(characteristic_pair([e for e in es] or [HardyExpr()]))
    top = _fastest_index(es)
    etas = [_eta(e, es[top]) for e in es]
    rest_idx = [i for i in range(k) if i != top]
    reduced = [es[i] - es[top] * etas[i] for i in rest_idx]
    g_hat, lam_hat = _snf_essential(reduced, trace)
    g = g_hat + [es[top]]
    lam = [None] * k
    for row, i in zip(lam_hat, rest_idx):
        lam[i] = list(row) + [etas[i]]
    lam[top] = [Fraction(0)] * len(g_hat) + [Fraction(1)]
    return g, lam


def _coords(v: HardyExpr, pivots) -> list[Fraction]:
    return [v.coefficient(*key) for key in pivots]


def _reduced_basis(g: list[HardyExpr], lam: list[list[Fraction]]):
    """Row-reduce the basis: monic leading terms, no term at another pivot."""
    rows = sorted((x for x in g if not x.is_zero()), key=lambda x: x.growth_key())
    # full reduction, fastest first so later subtractions touch only slower pivots
    basis: list[HardyExpr] = []
    for v in reversed(rows):
        for b in basis:
            c = v.coefficient(*b.growth_key())
            if c:
                v = v - b * c
        basis.append(v)
    basis = [b / b.leading.coeff for b in basis if not b.is_zero()]
    changed = True
    while changed:
        changed = False
        for i, b in enumerate(basis):
            for j, other in enumerate(basis):
                if i == j:
                    continue
                c = b.coefficient(*other.growth_key())
                if c:
                    basis[i] = b = b - other * c
                    changed = True
    basis.sort(key=lambda x: x.growth_key())
    pivots = [b.growth_key() for b in basis]
    new_lam = []
    for row in lam:
        combo = HardyExpr()
        for c, x in zip(row, g):
            if c:
                combo = combo + x * c
        new_lam.append(_coords(combo, pivots))
    return basis, new_lam


def simple_normal_form(fs: Sequence[HardyExpr], trace: Optional[list] = None) -> NormalForm:
    """Growth-separated basis g with f_i = sum lam_ij g_j + p_i + o(1)."""
    if not fs:
        raise EmptyInput("simple_normal_form needs at least one function")
    parts = [split_parts(f) for f in fs]
    g, lam = _snf_essential([E for _, E, _ in parts], trace)
    g, lam = _reduced_basis(g, lam) if g else ([], [[] for _ in fs])
    return NormalForm(g=g, lam=lam, p=[P for P, _, _ in parts], ell=[_ell(x) for x in g])


# ------------------------------------------------ derivative-closed normal form

def _split_high(f: HardyExpr):
    """f = A + B with A the terms of degree >= 2 (key > (1, 0))."""
    one = (Fraction(1), 0)
    A = HardyExpr(x for x in f.terms if x.key > one)
    B = HardyExpr(x for x in f.terms if x.key <= one)
    return A, B


def _nf(rows: list[HardyExpr], trace):
    """Rows are arbitrary expressions; returns (g, lam, p) with exact residuals Z_i."""
    k = len(rows)
    parts = [split_parts(f) for f in rows]
    es = [E for _, E, _ in parts]
    polys = [P for P, _, _ in parts]
    if all(e.is_zero() for e in es):
        return [], [[] for _ in range(k)], polys
    cp = characteristic_pair(es)
    if cp.d <= 1:
        nf = simple_normal_form(es, trace)
        return nf.g, nf.lam, [polys[i] + nf.p[i] for i in range(k)]
    if trace is not None:
        trace.append(cp)
    top = _fastest_index(es)
    fk = es[top]
    etas = [_eta(e, fk) for e in es]
    A, B = _split_high(fk)
    others = [i for i in range(k) if i != top]
    sub_rows = [es[i] - fk * etas[i] for i in others] + [A.differentiate(), B]
    g_hat, lam_hat, p_hat = _nf(sub_rows, trace)
    lam_dA, lam_B = lam_hat[-2], lam_hat[-1]

    g = list(g_hat)
    lam_k = [Fraction(0)] * len(g)
    index = {x: j for j, x in enumerate(g)}
    derivs = {}
    for j, x in enumerate(g):
        if degree(x) >= 2:
            derivs[x.differentiate()] = j
    for j, c in enumerate(lam_dA):
        if not c:
            continue
        anti = derivs.get(g_hat[j])
        if anti is None:
            try:
                new = g_hat[j].integrate()
            except UnsupportedTerm as exc:
                raise UnsupportedTerm(f"normal form needs an antiderivative outside the class: {exc}") from None
            if new in index:
                anti = index[new]
            else:
                anti = len(g)
                g.append(new)
                index[new] = anti
                lam_k.append(Fraction(0))
            derivs[g_hat[j]] = anti
        lam_k[anti] += c
    for j, c in enumerate(lam_B):
        lam_k[j] += c
    p_k = p_hat[-2].integrate() + p_hat[-1]

    m = len(g)
    lam = [None] * k
    p = [None] * k
    lam[top] = lam_k
    p[top] = p_k + polys[top]
    for row, i, eta in zip(lam_hat, others, (etas[i] for i in others)):
        padded = list(row) + [Fraction(0)] * (m - len(row))
        lam[i] = [a + eta * b for a, b in zip(padded, lam_k)]
        p[i] = p_hat[others.index(i)] + p_k * eta + polys[i]
    return g, lam, p


def _normalise_chains(g: list[HardyExpr], lam: list[list[Fraction]]):
    """Sort by growth and make the top of every derivative chain monic."""
    order = sorted(range(len(g)), key=lambda j: g[j].growth_key())
    g = [g[j] for j in order]
    lam = [[row[j] for j in order] for row in lam]
    pos = {x: j for j, x in enumerate(g)}
    parent = {}
    for j, x in enumerate(g):
        if degree(x) >= 2:
            d = x.differentiate()
            if d in pos:
                parent[pos[d]] = j
    scale = [Fraction(1)] * len(g)
    for j in reversed(range(len(g))):
        if j in parent:
            scale[j] = scale[parent[j]]
        else:
            scale[j] = 1 / g[j].leading.coeff
    g = [x * s for x, s in zip(g, scale)]
    lam = [[c / s for c, s in zip(row, scale)] for row in lam]
    return g, lam


def normal_form(fs: Sequence[HardyExpr], trace: Optional[list] = None) -> NormalForm:
    """Derivative-closed normal form: deg(g) >= 2 implies g' is in the basis.

    ``trace``, when given, receives the characteristic pair of every
    recursive call in order, for termination checks.
    """
    if not fs:
        raise EmptyInput("normal_form needs at least one function")
    g, lam, p = _nf(list(fs), trace)
    if g:
        keep = [j for j, x in enumerate(g) if not x.is_zero()]
        g = [g[j] for j in keep]
        lam = [[row[j] if j < len(row) else Fraction(0) for j in keep] for row in lam]
        g, lam = _normalise_chains(g, lam)
    else:
        lam = [[] for _ in fs]
    return NormalForm(g=g, lam=lam, p=p, ell=[_ell(x) for x in g])


def verify_normal_form(fs: Sequence[HardyExpr], nf: NormalForm, closed: bool = True) -> list[str]:
    """Exact check of the normal-form properties; returns the list of failures."""
    errors = []
    for a, b in zip(nf.g, nf.g[1:]):
        if compare(a, b).kind is not Growth.STRICTLY_SLOWER:
            errors.append(f"(1) {a} is not strictly slower than {b}")
    if len(nf.ell) != len(nf.g):
        errors.append("(2) ell has the wrong length")
    for x, l in zip(nf.g, nf.ell):
        if x.is_zero():
            continue
        lo, hi = HardyExpr.monomial(l - 1), HardyExpr.monomial(l)
        if l < 1 or compare(lo, x).kind is not Growth.STRICTLY_SLOWER \
                or compare(x, hi).kind is not Growth.STRICTLY_SLOWER:
            errors.append(f"(2) t^{l - 1} < {x} < t^{l} fails")
    if closed:
        members = set(nf.g)
        for x in nf.g:
            if degree(x) >= 2 and x.differentiate() not in members:
                errors.append(f"(3) derivative of {x} missing")
    if len(nf.lam) != len(fs) or len(nf.p) != len(fs):
        errors.append("(4) row count mismatch")
        return errors
    for i, (p, r) in enumerate(zip(nf.p, nf.residual(fs))):
        if not polynomial_part(p)[1].is_zero():
            errors.append(f"(4) p_{i} = {p} is not a polynomial")
        if not r.is_zero() and r.growth_key() >= ZERO_KEY:
            errors.append(f"(4) residual of row {i} does not tend to 0: {r}")
    return errors


# ------------------------------------------------------------ Property (P_W)

def _window(key, scheme: WScheme) -> bool:
    """Unbounded but at most as fast as log W."""
    return key > ZERO_KEY and hardy_key(key) <= scheme.log_w_key()


def _unbounded_nonpoly(f: HardyExpr) -> dict:
    _, rest = polynomial_part(f)
    return {x.key: x.coeff for x in rest.terms if x.key > ZERO_KEY}


def _echelon_violation(vectors, scheme):
    """Gaussian elimination on {key: coeff} vectors tracking combinations.

    Returns the combination (list of coefficients) of a span element whose
    leading key lies in the window, or None.  Every span element has its
    leading key among the pivots, so checking pivots is exhaustive.
    """
    n = len(vectors)
    pivots = {}
    for idx, v in enumerate(vectors):
        v = dict(v)
        comb = [Fraction(0)] * n
        comb[idx] = Fraction(1)
        while v:
            lead = max(v)
            if lead in pivots:
                pv, pc = pivots[lead]
                c = v[lead] / pv[lead]
                for key, val in pv.items():
                    nv = v.get(key, 0) - c * val
                    if nv:
                        v[key] = nv
                    else:
                        v.pop(key, None)
                comb = [a - c * b for a, b in zip(comb, pc)]
            else:
                pivots[lead] = (v, comb)
                break
    for lead, (_, comb) in sorted(pivots.items()):
        if _window(lead, scheme):
            return comb
    return None


def check_property_p_w(fs: Sequence[HardyExpr], scheme: WScheme = IDENTITY) -> PropertyReport:
    """Decide (P_W) exactly.

    For fixed derivative orders n, the non-polynomial parts of f_i^(n_i)
    span a space whose leading keys are exactly the echelon pivots, and
    subtracting a polynomial p can only remove polynomial terms.  So a
    combination with |f - p| unbounded yet << log W exists iff some pivot
    lies in ((0, 0), log W].  Orders beyond deg f_i give vanishing
    functions and can be skipped.  The union over all orders is checked
    first: if even the full span has no pivot in the window, (P_W) holds.
    """
    fs = list(fs)
    if not fs:
        return PropertyReport(True, scheme)
    degs = [degree(f) for f in fs]
    derivs = []
    for f, d in zip(fs, degs):
        chain = [f]
        for _ in range(d):
            chain.append(chain[-1].differentiate())
        derivs.append(chain)
    flat = [_unbounded_nonpoly(x) for chain in derivs for x in chain]
    if _echelon_violation(flat, scheme) is None:
        return PropertyReport(True, scheme)
    for orders in itertools.product(*(range(d + 1) for d in degs)):
        funcs = [derivs[i][n] for i, n in enumerate(orders)]
        comb = _echelon_violation([_unbounded_nonpoly(x) for x in funcs], scheme)
        if comb is None:
            continue
        combo = HardyExpr()
        for c, x in zip(comb, funcs):
            if c:
                combo = combo + x * c
        _, nonpoly = polynomial_part(combo)
        key = nonpoly.growth_key()
        rel = "same order as" if hardy_key(key) == scheme.log_w_key() else "slower than"
        witness = PropertyWitness(
            coefficients=comb,
            orders=list(orders),
            combination=combo,
            non_polynomial=nonpoly,
            classification=f"unbounded and {rel} log W for W = {scheme.name}",
        )
        return PropertyReport(False, scheme, witness)
    return PropertyReport(True, scheme)


def check_property_p(fs: Sequence[HardyExpr]) -> PropertyReport:
    return check_property_p_w(fs, IDENTITY)


def choose_w(fs: Sequence[HardyExpr]) -> WScheme:
    """First catalogue scheme with log W strictly slower than every g_j / t^(l_j - 1)."""
    nf = normal_form(fs) if fs else NormalForm([], [], [], [])
    keys = []
    for x, l in zip(nf.g, nf.ell):
        if x.is_zero():
            continue
        alpha, beta = x.growth_key()
        keys.append(hardy_key((alpha - (l - 1), beta)))
    for scheme in CATALOGUE:
        if all(scheme.log_w_key() < k for k in keys):
            return scheme
    tight = min(keys)
    raise NoSchemeFound(f"no catalogue W has log W below growth key {tight}", tightest=tight)
