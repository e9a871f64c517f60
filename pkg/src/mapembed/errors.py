"""Exception types shared across the package.

The CLI maps these onto exit codes: ``DataError`` and subclasses exit
with 2, ``DivergenceError`` with 3.
"""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class DimensionMismatchError(DataError):
    pass


class DegenerateVectorError(DataError):
    """A vector with zero Euclidean norm where a direction is required."""


class DegenerateStatisticsError(DataError):
    """A statistic is undefined for the given input (e.g. constant ranks)."""


class DivergenceError(ArithmeticError):
    """Training produced a non-finite loss."""
