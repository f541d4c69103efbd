"""Exception types raised across the package."""


class ExtremalBackgroundError(ValueError):
    """Black hole parameters outside the non-extremal range ``0 <= |e| < M``."""


class DomainError(ValueError):
    """A geometric quantity was requested outside the exterior ``r > r_plus``."""


class InversionError(ArithmeticError):
    """The tortoise-coordinate inversion failed to converge.

    The ``payload`` attribute carries the offending inputs and the residual
    reached, so callers can report which nodes failed.
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload or {}


class GridError(ValueError):
    """Invalid grid description or geometry-cache failure."""


class HypothesisError(ValueError):
    """Inputs violate the hypothesis of the estimate being certified."""


class ConfigError(ValueError):
    """A run or sweep configuration failed validation.

    ``field`` names the offending key (dotted path) when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
