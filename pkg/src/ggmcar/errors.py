"""Exception types shared across the package."""


class GgmcarError(Exception):
    """Base class for package errors."""


class ConfigError(GgmcarError):
    """Bad user input: malformed files, inconsistent options, invalid parameters."""


class NumericError(GgmcarError):
    """Numerical failure during sampling or factorization."""


class NotPositiveDefiniteError(NumericError):
    """A matrix required to be positive definite is not.

    ``pivot`` is the 1-based index of the first failing leading minor when known.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ConeViolationError(NumericError):
    """A precision matrix violates the zero pattern of its graph."""
