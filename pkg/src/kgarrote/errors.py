"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
``DataError`` for anything wrong with user-supplied data and
``NumericalError`` for algorithmic failures (factorizations, optimizers,
aborted resampling runs).
"""


class GarroteError(Exception):
    """Base class for package errors."""


class DataError(GarroteError):
    """Invalid, unparsable, or degenerate input data."""


class NumericalError(GarroteError):
    """A numerical routine failed beyond what jitter/retries can absorb."""
