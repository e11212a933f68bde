"""Exception types shared across the package."""


class NilsamplerError(Exception):
    """Base class for every error raised by nilsampler."""


class ParseError(NilsamplerError, ValueError):
    pass


class ZeroComparand(NilsamplerError, ValueError):
    """A growth comparison was asked of the zero function."""


class DomainError(NilsamplerError, ValueError):
    """Evaluation outside the half-line [2, oo)."""


class UnsupportedTerm(NilsamplerError, ValueError):
    """A term lies outside the sub-class an algorithm can handle exactly."""


class EmptyInput(NilsamplerError, ValueError):
    pass


class NoSchemeFound(NilsamplerError):
    def __init__(self, message, tightest=None):
        super().__init__(message)
        self.tightest = tightest


class DimMismatch(NilsamplerError, ValueError):
    pass


class NonCommuting(NilsamplerError, ValueError):
    pass


class RangeError(NilsamplerError, ValueError):
    pass


class InsufficientLength(NilsamplerError, ValueError):
    pass


class DimensionTooLarge(NilsamplerError, ValueError):
    pass


class NumericBudgetError(NilsamplerError, ArithmeticError):
    """Magnitudes grew past what double-double can reduce mod 1 reliably."""


class ConfigError(NilsamplerError, ValueError):
    pass
