"""Arbitrary-precision reference evaluation of orbit points."""
import mpmath

from nilsampler.nilgroup import positions

mpmath.mp.dps = 200


def mp_scalar(text):
    return mpmath.mpf(mpmath.mpmathify(eval(str(text), {"sqrt": mpmath.sqrt, "pi": mpmath.pi})))


def mp_matrix(dim, entries):
    m = mpmath.eye(dim)
    for (i, j), v in entries.items():
        m[i, j] = v
    return m


def mp_power(m, s):
    """exp(s log m) for unitriangular m, series truncated at dim - 1."""
    n = m.rows
    N = m - mpmath.eye(n)
    L = mpmath.zeros(n)
    P = mpmath.eye(n)
    for k in range(1, n):
        P = P * N
        L += P * ((-1) ** (k + 1) / mpmath.mpf(k))
    out = mpmath.eye(n)
    P = mpmath.eye(n)
    for k in range(1, n):
        P = P * (L * s)
        out += P / mpmath.factorial(k)
    return out


def mp_reduce(m):
    n = m.rows
    m = m.copy()
    for i, j in positions(n):
        c = mpmath.floor(m[i, j])
        for a in range(i + 1):
            m[a, j] -= c * m[a, i]
    return [m[i, j] for i, j in positions(n)]


def orbit_point(dim, factors, n):
    """factors: list of (entries dict of mp values, callable s(n) in mp)."""
    v = mpmath.eye(dim)
    for entries, f in factors:
        v = v * mp_power(mp_matrix(dim, entries), f(mpmath.mpf(n)))
    return [float(x) for x in mp_reduce(v)], v
