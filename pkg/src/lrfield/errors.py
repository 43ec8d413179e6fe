"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class LRFieldError(Exception):
    """Base class for all errors raised by lrfield."""


class DomainError(LRFieldError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ConfigError(LRFieldError, ValueError):
    """Invalid or inconsistent configuration value."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class ShapeError(LRFieldError, ValueError):
    """Array lengths that should agree do not."""


class NumericError(LRFieldError, ArithmeticError):
    """A numerical procedure failed (factorization, quadrature)."""


class ResourceError(LRFieldError, RuntimeError):
    """Requested problem size exceeds the configured memory/size budget."""
