"""Exception types shared across the pipeline."""


class MarginaliaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(MarginaliaError, ValueError):
    pass


class DegenerateInputError(MarginaliaError, ValueError):
    """The input carries no usable signal (blank page, flat profile...)."""


class UndefinedMetricError(MarginaliaError, ValueError):
    pass


class ImageIOError(MarginaliaError, OSError):
    pass


class MarginNotFoundError(MarginaliaError):
    """No profile crossing was found.

    ``fallback`` holds the full-page extent ``(low, high)`` for the axis that
    failed so callers can degrade gracefully.
    """

    def __init__(self, message, fallback):
        super().__init__(message)
        self.fallback = fallback
