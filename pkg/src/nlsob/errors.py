"""Shared exception types."""


class DimensionMismatchError(ValueError):
    """Point dimension does not match the field dimension."""


class UnsupportedOperationError(RuntimeError):
    """Operation not defined for this field shape (e.g. gradient of a jump)."""


class DivergentIntegralError(ArithmeticError):
    """The requested integral diverges for this field."""


class ZeroFieldError(ValueError):
    """Operation undefined for the identically-zero field."""


class PreconditionError(ValueError):
    """A documented precondition of the operation is violated."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
