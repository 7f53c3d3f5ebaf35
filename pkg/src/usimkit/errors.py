"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: DataError -> 2, NumericError -> 3.
"""


class UsimkitError(Exception):
    """Base class for all toolkit errors."""


class DataError(UsimkitError):
    """Malformed input, broken referential integrity, or missing resources."""


class NumericError(UsimkitError):
    """Degenerate or ill-conditioned numerical computation."""


class UndefinedMetricError(NumericError):
    """A metric is undefined for this input (e.g. constant-input Spearman)."""
