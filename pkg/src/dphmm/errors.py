"""Exception types shared across the package."""


class DphmmError(Exception):
    """Base class for all package errors."""


class DomainError(DphmmError, ValueError):
    """An argument violates a documented precondition."""


class DataError(DphmmError, ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(DphmmError, RuntimeError):
    """A computation produced values no valid continuation exists for,
    e.g. an all-zero forward vector or zero total assignment weight."""
