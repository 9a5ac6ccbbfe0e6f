"""Exception types raised by the estimation pipeline."""


class GCompError(Exception):
    """Base class for all package errors."""


class DataError(GCompError, ValueError):
    """Malformed or invalid input data."""


class DegenerateOutcome(GCompError):
    """The outcome is constant, so no outcome model can be fitted."""


class DegenerateMarginal(GCompError):
    """A marginal probability is numerically 0 or 1; the log odds ratio is undefined."""


class InferenceUnstable(GCompError):
    """Too many bootstrap replicates failed to produce an estimate."""
