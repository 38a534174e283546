"""Exception types shared across the package."""


class ImboostError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(ImboostError):
    """An array argument has the wrong shape or length."""


class NumericError(ImboostError):
    """A non-finite value appeared where a finite one is required."""

    def __init__(self, message, term=None):
        super().__init__(message)
        self.term = term


class DegenerateDataError(ImboostError):
    """Input data cannot support the requested fit (e.g. all values equal)."""


class LabelConflictError(ImboostError):
    """An oracle answer duplicates or contradicts an existing label."""


class UndefinedMetricError(ImboostError):
    """A ranking metric was requested with only one class present."""


class ParseError(ImboostError):
    """A data file could not be parsed."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
