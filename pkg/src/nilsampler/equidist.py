"""Weyl sums, discrepancy, van der Corput correlations and the torus/full criterion.

All accumulators are per-chunk double-double partial sums merged in chunk
order, so results do not depend on how many worker threads produced them.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import dd
from .errors import DimensionTooLarge, EmptyInput, InsufficientLength
from .orbit import CompiledOrbit, OrbitSpec, check_range, compile_orbit, generate
from .schemes import WScheme

EXACT_L2_MAX_N = 10**5
MAX_L2_DIM = 6
BINNED_MAX_DIM = 3
CELL_BUDGET_BITS = 21
SUBSAMPLE_HIGH_DIM = 20000
TWO_PI = 2.0 * math.pi


# ------------------------------------------------------------------ weights

def w_weights(scheme: WScheme, n_start: int, n_end: int, q: int = 1, r: Optional[int] = None):
    """Weights w(n) on the progression and the telescoped normaliser sum w(n)."""
    if r is None:
        r = n_start % q
    first = n_start + ((r - n_start) % q)
    ns = np.arange(first, n_end + 1, q, dtype=np.int64)
    w = scheme.weights(ns)
    if q == 1:
        total = scheme.total(n_start, n_end)
        # the closed form loses digits for Cesaro-sized sums only in the last place;
        # fall back to compensated summation when they disagree noticeably
        s = dd.dd_sum(w)
        direct = float(s.hi + s.lo)
        if not math.isclose(total, direct, rel_tol=1e-9):
            total = direct
    else:
        s = dd.dd_sum(w)
        total = float(s.hi + s.lo)
    return w, total


# --------------------------------------------------------------- Weyl sums

def _as_2d(points) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return x


def _dd_complex_sum(z: np.ndarray):
    re = dd.dd_sum(z.real)
    im = dd.dd_sum(z.imag)
    return re, im


def weyl_sum(points, k, weights=None) -> complex:
    """(1 / sum w) * sum w(n) e(k . x_n) with compensated sums."""
    x = _as_2d(points)
    if x.shape[0] == 0:
        raise EmptyInput("weyl_sum of an empty point set")
    k = np.atleast_1d(np.asarray(k, dtype=np.int64))
    if len(k) != x.shape[1]:
        raise ValueError(f"frequency has {len(k)} entries, points have {x.shape[1]} coordinates")
    phase = np.zeros(x.shape[0])
    # reduce k*x mod 1 before scaling by 2 pi to keep the argument small
    for j, kj in enumerate(k):
        if kj:
            phase = phase + np.mod(kj * x[:, j], 1.0)
    z = np.exp(1j * TWO_PI * phase)
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
        z = z * w
        tw = dd.dd_sum(w)
        total = tw.hi + tw.lo
    else:
        total = float(x.shape[0])
    re, im = _dd_complex_sum(z)
    return complex((re.hi + re.lo) / total, (im.hi + im.lo) / total)


def frequencies(d: int, K: int, canonical: bool = False) -> list[tuple[int, ...]]:
    """All k in Z^d with 0 < |k|_inf <= K; ``canonical`` keeps one of each +-k pair."""
    out = []
    for k in itertools.product(range(-K, K + 1), repeat=d):
        if not any(k):
            continue
        if canonical:
            first = next(v for v in k if v)
            if first < 0:
                continue
        out.append(k)
    return out


class WeylAccumulator:
    """Mergeable double-double sums of w(n) e(k . x_n) for a fixed frequency list."""

    def __init__(self, freqs: Sequence[tuple[int, ...]], K: int):
        self.freqs = list(freqs)
        self.K = K
        m = len(self.freqs)
        self.re = dd.DD(np.zeros(m), np.zeros(m))
        self.im = dd.DD(np.zeros(m), np.zeros(m))
        self.weight = dd.DD(0.0, 0.0)
        self.count = 0

    def partial(self, x: np.ndarray, w: np.ndarray):
        """Sums for one chunk, returned rather than merged (merging is ordered)."""
        x = _as_2d(x)
        # k.x is formed from exact small-integer multiples and reduced mod 1 before the
        # exponential, so confined projections (e.g. x = y with k = (1, -1)) give exactly 1
        mult = {(j, kj): np.mod(kj * x[:, j], 1.0) for k in self.freqs for j, kj in enumerate(k) if kj}
        re_hi, re_lo, im_hi, im_lo = [], [], [], []
        for k in self.freqs:
            phase = np.zeros(x.shape[0])
            for j, kj in enumerate(k):
                if kj:
                    phase = phase + mult[(j, kj)]
            ang = TWO_PI * np.mod(phase, 1.0)
            re, im = dd.dd_sum(w * np.cos(ang)), dd.dd_sum(w * np.sin(ang))
            re_hi.append(re.hi)
            re_lo.append(re.lo)
            im_hi.append(im.hi)
            im_lo.append(im.lo)
        ws = dd.dd_sum(w)
        return (dd.DD(np.array(re_hi), np.array(re_lo)), dd.DD(np.array(im_hi), np.array(im_lo)), ws, x.shape[0])

    def merge(self, part) -> None:
        re, im, ws, n = part
        self.re = dd.add(self.re, re)
        self.im = dd.add(self.im, im)
        self.weight = dd.add(self.weight, ws)
        self.count += n

    def values(self) -> dict[tuple[int, ...], complex]:
        total = float(self.weight.hi + self.weight.lo)
        out = {}
        for i, k in enumerate(self.freqs):
            out[k] = complex(float(self.re.hi[i] + self.re.lo[i]) / total,
                             float(self.im.hi[i] + self.im.lo[i]) / total)
        return out


# ------------------------------------------------------------- discrepancy

def star_discrepancy_1d(points, weights=None) -> float:
    """Exact D*_N = sup_a |#{x < a}/N - a| via the sorted-points formula.

    With weights the empirical measure puts mass w_i / sum(w) on x_i.
    """
    x = np.asarray(points, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyInput("discrepancy of an empty point set")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if weights is None:
        n = x.size
        i = np.arange(1, n + 1, dtype=np.float64)
        return float(max(np.max(i / n - xs), np.max(xs - (i - 1) / n)))
    w = np.asarray(weights, dtype=np.float64)[order]
    cw = np.cumsum(w)
    cw = cw / cw[-1]
    prev = np.concatenate([[0.0], cw[:-1]])
    return float(max(np.max(cw - xs), np.max(xs - prev)))


def _warnock_1d(x: np.ndarray, w: np.ndarray) -> float:
    # sum_ij w_i w_j (1 - max(x_i, x_j)) via sorted order
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], w[order]
    before = np.cumsum(ws) - ws  # weight strictly before in sorted order
    pair = float(np.sum(ws * ws * (1 - xs)) + 2.0 * np.sum(ws * before * (1 - xs)))
    single = float(np.sum(ws * (1 - xs**2)))
    return 1.0 / 3.0 - single + pair


class _Fenwick:
    def __init__(self, n):
        self.n = n
        self.t = [0.0] * (n + 1)

    def add(self, i, v):
        i += 1
        while i <= self.n:
            self.t[i] += v
            i += i & -i

    def prefix(self, i):
        # sum over [0, i)
        s = 0.0
        while i > 0:
            s += self.t[i]
            i -= i & -i
        return s


def _warnock_2d(x: np.ndarray, w: np.ndarray) -> float:
    """O(N log N) exact pair sum for d = 2 using a Fenwick tree over y-ranks."""
    n = x.shape[0]
    order = np.lexsort((x[:, 1], x[:, 0]))
    xs, ys, ws = x[order, 0], x[order, 1], w[order]
    yrank = np.empty(n, dtype=np.int64)
    yrank[np.argsort(ys, kind="stable")] = np.arange(n)
    cnt, sm = _Fenwick(n), _Fenwick(n)
    total_w = 0.0
    total_wy = 0.0
    pair = 0.0
    for j in range(n):
        r = int(yrank[j])
        yj = ys[j]
        # earlier i (x_i <= x_j): contributes w_i (1 - max(y_i, y_j))
        w_le = cnt.prefix(r)
        wy_le = sm.prefix(r)
        w_gt = total_w - w_le
        wy_gt = total_wy - wy_le
        inner = w_le * (1 - yj) + (w_gt - wy_gt)
        pair += 2.0 * ws[j] * (1 - xs[j]) * inner
        cnt.add(r, ws[j])
        sm.add(r, ws[j] * yj)
        total_w += ws[j]
        total_wy += ws[j] * yj
    pair += float(np.sum(ws * ws * (1 - xs) * (1 - ys)))
    single = float(np.sum(ws * (1 - xs**2) * (1 - ys**2)))
    return 1.0 / 9.0 - 0.5 * single + pair


def _warnock_pairwise(x: np.ndarray, w: np.ndarray, block: int = 1024) -> float:
    """O(N^2 d) pair sum, blocked; the kernel is symmetric so only j >= block start is visited."""
    n, d = x.shape
    pair = 0.0
    for a in range(0, n, block):
        b = min(a + block, n)
        xa = x[a:b]
        prod = np.ones((b - a, n - a))
        for k in range(d):
            prod *= 1.0 - np.maximum(xa[:, k:k + 1], x[None, a:, k])
        wa = w[a:b]
        pair += float(wa @ (prod[:, : b - a] @ wa))
        if b < n:
            pair += 2.0 * float(wa @ (prod[:, b - a:] @ w[b:]))
    single = float(np.sum(w * np.prod(1.0 - x**2, axis=1)))
    return 3.0 ** (-d) - 2.0 ** (1 - d) * single + pair


def l2_exact(points, weights=None) -> float:
    """Warnock's formula for the L2 star discrepancy (weights normalised to sum 1)."""
    x = _as_2d(points)
    n, d = x.shape
    if n == 0:
        raise EmptyInput("discrepancy of an empty point set")
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=np.float64) / np.sum(weights)
    if d == 1:
        t2 = _warnock_1d(x[:, 0], w)
    elif d == 2:
        t2 = _warnock_2d(x, w)
    else:
        t2 = _warnock_pairwise(x, w)
    return math.sqrt(max(t2, 0.0))


@dataclass
class BinnedL2:
    estimate: float
    lower: float
    upper: float
    bins_per_axis: int


def bins_per_axis(d: int) -> int:
    return 2 ** (CELL_BUDGET_BITS // d)


def l2_binned(points, weights=None, bins: Optional[int] = None) -> BinnedL2:
    """Grid estimate of the L2 star discrepancy.

    Counts at grid corners are exact (cumulative histogram).  The estimate
    is the lower-corner Riemann sum of the squared local discrepancy; the
    bracket uses monotonicity of the count and volume terms inside a cell.
    """
    x = _as_2d(points)
    n, d = x.shape
    if n == 0:
        raise EmptyInput("discrepancy of an empty point set")
    m = bins or bins_per_axis(d)
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=np.float64) / np.sum(weights)
    idx = np.minimum((x * m).astype(np.int64), m - 1)
    flat = np.ravel_multi_index(tuple(idx[:, k] for k in range(d)), (m,) * d)
    hist = np.bincount(flat, weights=w, minlength=m**d).reshape((m,) * d)
    C = hist
    for k in range(d):
        C = np.cumsum(C, axis=k)
    # C[i] = mass below the upper corner (i+1)/m; pad a zero layer for lower corners
    Cp = np.pad(C, [(1, 0)] * d)
    lower_sl = tuple(slice(0, m) for _ in range(d))
    upper_sl = tuple(slice(1, m + 1) for _ in range(d))
    Ca, Cb = Cp[lower_sl], Cp[upper_sl]
    grid_lo = np.arange(m) / m
    grid_hi = np.arange(1, m + 1) / m
    Va = np.ones((m,) * d)
    Vb = np.ones((m,) * d)
    for k in range(d):
        shape = [1] * d
        shape[k] = m
        Va = Va * grid_lo.reshape(shape)
        Vb = Vb * grid_hi.reshape(shape)
    est = Ca - Va
    hi_dev = np.maximum(np.abs(Ca - Vb), np.abs(Cb - Va))
    lo_dev = np.where((Ca - Vb <= 0) & (Cb - Va >= 0), 0.0, np.minimum(np.abs(Ca - Vb), np.abs(Cb - Va)))
    cells = float(m**d)
    return BinnedL2(
        estimate=math.sqrt(float(np.sum(est**2)) / cells),
        lower=math.sqrt(float(np.sum(lo_dev**2)) / cells),
        upper=math.sqrt(float(np.sum(hi_dev**2)) / cells),
        bins_per_axis=m,
    )


def l2_discrepancy(points, weights=None) -> float:
    """L2 star discrepancy: exact up to 10^5 points, binned grid estimate beyond (d <= 3)."""
    x = _as_2d(points)
    n, d = x.shape
    if d > MAX_L2_DIM:
        raise DimensionTooLarge(f"L2 discrepancy supports d <= {MAX_L2_DIM}, got {d}")
    if d == 1 or n <= EXACT_L2_MAX_N:
        return l2_exact(x, weights)
    if d > BINNED_MAX_DIM:
        raise DimensionTooLarge(f"binned L2 estimator is limited to d <= {BINNED_MAX_DIM} (got d = {d}, N = {n})")
    return l2_binned(x, weights).estimate


# ------------------------------------------------------- van der Corput

@dataclass
class CorrelationTable:
    H: int
    N: int
    A: list  # complex, h = 0..H
    average: complex
    P_N: float
    p_N: float
    p_max: float
    tail_ratio: float
    lhs: float
    rhs: float
    slack: float
    holds: bool

    @property
    def mean_correlation(self) -> complex:
        """(1/H) sum_{h=1..H} A(h)."""
        return sum(self.A[1:], 0j) / self.H

    def to_json(self) -> dict:
        m = self.mean_correlation
        return {
            "H": self.H,
            "N": self.N,
            "A": [{"h": h, "re": a.real, "im": a.imag} for h, a in enumerate(self.A)],
            "mean_correlation": {"re": m.real, "im": m.imag},
            "average": {"re": self.average.real, "im": self.average.imag},
            "P_N": self.P_N,
            "p_N": self.p_N,
            "tail_ratio": self.tail_ratio,
            "vdc_check": {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "holds": self.holds},
        }


VDC_C = 10.0
VDC_TOL = 1e-6


def vdc_correlations(values, weights, H: int, n_start: int = 2) -> CorrelationTable:
    """A(h) = (1/P_N) sum_{n<=N} p_n u(n+h) conj(u(n)) with N = len - H, h = 0..H.

    ``weights`` is either the array p_n or a WScheme, in which case
    p_n = w(n) for n = n_start, n_start + 1, ...
    Also checks |(1/P_N) sum p_n u(n)|^2 <= (1/H) sum_{|h|<H} (1 - |h|/H) Re A(h)
    + c (p_N/P_N + H/N) with c = 10.
    """
    u = np.asarray(values, dtype=np.complex128)
    if H < 1:
        raise ValueError("H must be at least 1")
    if len(u) < 10 * H:
        raise InsufficientLength(f"need at least {10 * H} values for H = {H}, got {len(u)}")
    if isinstance(weights, WScheme):
        p = weights.weights(np.arange(n_start, n_start + len(u), dtype=np.float64))
    else:
        p = np.asarray(weights, dtype=np.float64)
    if len(p) != len(u):
        raise ValueError("values and weights differ in length")
    N = len(u) - H
    pN = p[:N]
    Ps = dd.dd_sum(pN)
    P = float(Ps.hi + Ps.lo)
    base = np.conj(u[:N]) * pN
    A = []
    for h in range(H + 1):
        re, im = _dd_complex_sum(u[h:h + N] * base)
        A.append(complex((re.hi + re.lo) / P, (im.hi + im.lo) / P))
    re, im = _dd_complex_sum(u[:N] * pN)
    avg = complex((re.hi + re.lo) / P, (im.hi + im.lo) / P)
    # A(-h) = conj(A(h)) so the symmetric sum is real and doubles the h > 0 part
    tri = A[0].real + 2.0 * sum((1 - h / H) * A[h].real for h in range(1, H))
    rhs = tri / H
    ratio = float(pN[-1]) / P
    slack = VDC_C * (ratio + H / N)
    lhs = abs(avg) ** 2
    return CorrelationTable(
        H=H, N=N, A=A, average=avg, P_N=P, p_N=float(pN[-1]), p_max=float(np.max(pN)),
        tail_ratio=ratio, lhs=lhs, rhs=rhs, slack=slack, holds=lhs <= rhs + slack + VDC_TOL,
    )


# ------------------------------------------------------------ criterion

@dataclass
class Thresholds:
    weyl: float = 0.02
    discrepancy: float = 0.02


@dataclass
class EquidistReport:
    scheme: str
    N: int
    n_range: tuple
    progression: tuple
    K: int
    weyl: list
    torus_discrepancy: float
    torus_discrepancy_kind: str
    full_discrepancy: float
    full_discrepancy_kind: str
    verdicts: dict
    thresholds: dict
    max_abs_weyl: float
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        d["n_range"] = list(self.n_range)
        d["progression"] = list(self.progression)
        return d


@dataclass
class SeriesRow:
    n: int
    count: int
    weight: float
    abs_weyl_first: float
    max_abs_weyl: float


def _discrepancy(x: np.ndarray, w: Optional[np.ndarray], extra: dict, label: str, mode: str = "auto"):
    n, d = x.shape
    if d == 1:
        return star_discrepancy_1d(x[:, 0], w), "star"
    if d > MAX_L2_DIM:
        raise DimensionTooLarge(f"L2 discrepancy supports d <= {MAX_L2_DIM}, got {d}")
    if mode == "exact" or (mode == "auto" and n <= EXACT_L2_MAX_N and (d <= 2 or n <= SUBSAMPLE_HIGH_DIM)):
        return l2_exact(x, w), "l2-exact"
    if d <= BINNED_MAX_DIM:
        b = l2_binned(x, w)
        extra[f"{label}_binned"] = {"lower": b.lower, "upper": b.upper, "bins_per_axis": b.bins_per_axis}
        return b.estimate, "l2-binned"
    # exact Warnock on an evenly strided subsample
    step = -(-n // SUBSAMPLE_HIGH_DIM)
    xs = x[::step]
    ws = None if w is None else w[::step]
    extra[f"{label}_subsample"] = {"stride": step, "points": int(xs.shape[0])}
    return l2_exact(xs, ws), "l2-exact-subsample"


def run_statistics(co: CompiledOrbit, K: int = 5, threads: int = 1, series: bool = False):
    """Stream the orbit once; returns (weyl accumulator, coords, weights, series rows)."""
    dim = co.dim
    dt = dim - 1
    acc = WeylAccumulator(frequencies(dt, K, canonical=True), K)
    coords, weights, rows = [], [], []
    first = tuple([1] + [0] * (dt - 1))
    fi = acc.freqs.index(first)
    for ch in generate(co, threads=threads):
        part = acc.partial(ch.torus(dim), ch.weights)
        acc.merge(part)
        coords.append(ch.coords)
        weights.append(ch.weights)
        if series:
            vals = acc.values()
            rows.append(SeriesRow(int(ch.n[-1]), acc.count, float(acc.weight.hi + acc.weight.lo),
                                  abs(vals[acc.freqs[fi]]), max(abs(v) for v in vals.values())))
    if not coords:
        raise EmptyInput("the progression has no indices in range")
    return acc, np.concatenate(coords), np.concatenate(weights), rows


def criterion_check(spec: OrbitSpec, K: int = 5, thresholds: Optional[Thresholds] = None,
                    threads: int = 1, series: bool = False, mode: str = "auto",
                    precision: str = "extended"):
    """Torus-projection versus full-space equidistribution verdicts.

    Returns the report, and the series rows as well when ``series`` is set.
    """
    thresholds = thresholds or Thresholds()
    check_range(spec)
    co = compile_orbit(spec, precision)
    acc, x, w, rows = run_statistics(co, K, threads, series)
    dim = spec.dim
    dt = dim - 1
    weighted = spec.scheme.shape.value != "cesaro"
    wv = w if weighted else None
    vals = acc.values()
    weyl = []
    for k in frequencies(dt, K):
        if k in vals:
            z = vals[k]
        else:
            z = vals[tuple(-v for v in k)].conjugate()
        weyl.append({"k": list(k), "re": z.real, "im": z.imag, "abs": abs(z)})
    max_w = max(e["abs"] for e in weyl)
    extra = {}
    if mode not in ("auto", "exact", "binned"):
        raise ValueError(f"unknown discrepancy mode {mode!r}")
    td, tkind = _discrepancy(x[:, :dt], wv, extra, "torus", mode)
    if x.shape[1] == dt:
        fd, fkind = td, tkind
    else:
        fd, fkind = _discrepancy(x, wv, extra, "full", mode)
    torus_ok = max_w < thresholds.weyl and td < thresholds.discrepancy
    full_ok = fd < thresholds.discrepancy
    report = EquidistReport(
        scheme=spec.scheme.name,
        N=int(x.shape[0]),
        n_range=(spec.n_start, spec.n_end),
        progression=(spec.q, spec.r),
        K=K,
        weyl=weyl,
        torus_discrepancy=td,
        torus_discrepancy_kind=tkind,
        full_discrepancy=fd,
        full_discrepancy_kind=fkind,
        verdicts={"torus": torus_ok, "full": full_ok, "consistent": torus_ok == full_ok},
        thresholds={"weyl": thresholds.weyl, "discrepancy": thresholds.discrepancy},
        max_abs_weyl=max_w,
        extra=extra,
    )
    if series:
        return report, rows
    return report


def torus_sequence(co: CompiledOrbit, k: Sequence[int], threads: int = 1):
    """u(n) = e(k . torus(x_n)) and weights w(n) over the whole range."""
    us, ws = [], []
    k = np.asarray(k, dtype=np.int64)
    dt = co.dim - 1
    for ch in generate(co, threads=threads):
        t = ch.torus(co.dim)
        phase = np.zeros(len(ch.n))
        for j in range(dt):
            if k[j]:
                phase = phase + np.mod(k[j] * t[:, j], 1.0)
        us.append(np.exp(1j * TWO_PI * phase))
        ws.append(ch.weights)
    return np.concatenate(us), np.concatenate(ws)
