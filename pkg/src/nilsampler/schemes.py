"""Summation schemes W for W-averages (1/W(N)) sum w(n) x_n with w = W(n+1) - W(n).

The catalogue has four shapes: Identity (Cesaro), PowerLog exp((log t)^gamma),
Log and LogLog.  Growth of log W is exposed as a 4-tuple key
(a, b, c, d) meaning t^a (log t)^b (log log t)^c (log log log t)^d, which
compares lexicographically against HardyExpr growth keys embedded as
(alpha, beta, 0, 0).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import ParseError
from .scalars import format_scalar


class Shape(enum.Enum):
    IDENTITY = "cesaro"
    POWERLOG = "powlog"
    LOG = "log"
    LOGLOG = "loglog"


GrowthKey = tuple


def hardy_key(key) -> GrowthKey:
    alpha, beta = key
    return (Fraction(alpha), Fraction(beta), Fraction(0), Fraction(0))


@dataclass(frozen=True)
class WScheme:
    shape: Shape
    gamma: Optional[Fraction] = None

    def __post_init__(self):
        if self.shape is Shape.POWERLOG:
            g = Fraction(self.gamma)
            if not (0 < g <= 1):
                raise ValueError("powlog gamma must lie in (0, 1]")
            object.__setattr__(self, "gamma", g)
        elif self.gamma is not None:
            raise ValueError("gamma only applies to the powlog shape")

    @property
    def name(self) -> str:
        if self.shape is Shape.POWERLOG:
            g = self.gamma
            return f"powlog:{float(g)!r}" if Fraction(float(g)) == g else f"powlog:{format_scalar(g)}"
        return self.shape.value

    def __str__(self):
        return self.name

    @property
    def min_start(self) -> int:
        # w(1) involves log(1) = 0 in a denominator for these two shapes
        return 2 if self.shape in (Shape.LOGLOG, Shape.POWERLOG) else 1

    def log_w_key(self) -> GrowthKey:
        if self.shape is Shape.IDENTITY:
            return (Fraction(0), Fraction(1), Fraction(0), Fraction(0))
        if self.shape is Shape.POWERLOG:
            return (Fraction(0), self.gamma, Fraction(0), Fraction(0))
        if self.shape is Shape.LOG:
            return (Fraction(0), Fraction(0), Fraction(1), Fraction(0))
        return (Fraction(0), Fraction(0), Fraction(0), Fraction(1))

    def W(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.shape is Shape.IDENTITY:
            return t
        if self.shape is Shape.POWERLOG:
            return np.exp(np.log(t) ** float(self.gamma))
        if self.shape is Shape.LOG:
            return np.log(t)
        return np.log(np.log(t))

    def weights(self, n) -> np.ndarray:
        """w(n) = W(n+1) - W(n), computed without catastrophic cancellation."""
        n = np.asarray(n, dtype=np.float64)
        if self.shape is Shape.IDENTITY:
            return np.ones_like(n)
        step = np.log1p(1.0 / n)  # log(n+1) - log(n)
        if self.shape is Shape.LOG:
            return step
        L = np.log(n)
        if self.shape is Shape.LOGLOG:
            return np.log1p(step / L)
        g = float(self.gamma)
        Lg = L ** g
        # (L + step)^g - L^g = L^g * expm1(g * log1p(step / L))
        dLg = Lg * np.expm1(g * np.log1p(step / L))
        return np.exp(Lg) * np.expm1(dLg)

    def total(self, n_start: int, n_end: int) -> float:
        """sum_{n_start <= n <= n_end} w(n) = W(n_end + 1) - W(n_start)."""
        return float(self.W(n_end + 1) - self.W(n_start))


IDENTITY = WScheme(Shape.IDENTITY)
POWERLOG_HALF = WScheme(Shape.POWERLOG, Fraction(1, 2))
LOG = WScheme(Shape.LOG)
LOGLOG = WScheme(Shape.LOGLOG)

CATALOGUE = (IDENTITY, POWERLOG_HALF, LOG, LOGLOG)


def parse_scheme(text) -> WScheme:
    """Accepts cesaro|identity|log|loglog|powlog:<gamma>."""
    if isinstance(text, WScheme):
        return text
    s = str(text).strip().lower()
    if s in ("cesaro", "identity", "t"):
        return IDENTITY
    if s == "log":
        return LOG
    if s == "loglog":
        return LOGLOG
    if s.startswith("powlog"):
        _, _, g = s.partition(":")
        try:
            gamma = Fraction(g) if g else Fraction(1, 2)
        except ValueError:
            raise ParseError(f"bad powlog exponent in {text!r}") from None
        if gamma == 1:
            return IDENTITY
        return WScheme(Shape.POWERLOG, gamma)
    raise ParseError(f"unknown W scheme {text!r}")
