"""Exception types shared across the package."""


class SplittingError(Exception):
    """Base class for all package errors."""


class ParameterError(SplittingError, ValueError):
    """A parameter lies outside its admissible range."""


class InvalidInputError(SplittingError, ValueError):
    """Non-finite or malformed input data (states, potentials, step sizes)."""


class OrderingError(SplittingError, ValueError):
    """Simplex coordinates are not time-ordered (h >= eta_1 >= ... >= eta_d >= 0)."""


class CapabilityError(SplittingError):
    """The requested operation is not supported by this backend or potential."""


class OracleFailure(SplittingError, RuntimeError):
    """A reference computation failed to converge to the requested tolerance."""


class DivergenceError(SplittingError, RuntimeError):
    """A time integration produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
