"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ArgumentError -> 1, DataError -> 2,
NumericError -> 3.
"""


class MvLpeError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(MvLpeError, ValueError):
    """Invalid argument or configuration value."""


class DataError(MvLpeError, ValueError):
    """Input data violates a dataset invariant."""


class LoadError(DataError):
    """A dataset file is missing or unreadable."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class ShapeError(DataError):
    """Matrix shapes are inconsistent."""


class NumericError(MvLpeError, ArithmeticError):
    """A numerical routine failed (singular system, non-PD matrix)."""


class DivergenceError(NumericError):
    """An iterative solver produced non-finite or increasing iterates."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else None
