"""Exception types shared across the package."""


class NodalkitError(Exception):
    """Base class for all package errors."""


class DomainError(NodalkitError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class DegenerateInputError(NodalkitError, ValueError):
    """A Gaussian input has zero variance where a positive one is required."""


class DegenerateVarianceError(DegenerateInputError):
    """The field variance vanishes (equator, or pole for even degree)."""


class NumericalFailure(NodalkitError, RuntimeError):
    """An iterative numerical method did not converge.

    ``diagnostics`` carries whatever the failing routine knew at the time.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class GridTooCoarseError(NodalkitError, ValueError):
    """A sampling grid violates the resolution rule for its degree."""
