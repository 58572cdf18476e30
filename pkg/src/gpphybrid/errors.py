"""Exception hierarchy shared by all modules.

Anything deriving from :class:`InvalidInputError` is a problem with the data or
arguments handed in by the caller; the CLI maps those to exit code 2.
:class:`InvariantViolation` signals a bug and maps to exit code 3.
"""


class GPPError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(GPPError, ValueError):
    """Input values outside an operation's precondition."""


class DomainError(InvalidInputError):
    """Input outside the mathematical domain of a formula."""


class DegenerateEnvironmentError(InvalidInputError):
    """Environment for which the optimal chi formula has no meaning (c_a <= Gamma*)."""


class InconsistentInputError(InvalidInputError):
    """Mutually inconsistent inputs, e.g. dewpoint well above air temperature."""


class UndefinedIndexError(InvalidInputError):
    """Reflectance index with a zero denominator."""


class UnimputableError(InvalidInputError):
    """A site has no observed value at all for a required field."""


class UndefinedVarianceError(InvalidInputError):
    """R^2 requested against a constant observation vector."""


class InvalidPlanError(InvalidInputError):
    """Cross-validation plan that leaves a training or test split empty."""


class SchemaError(InvalidInputError):
    """Table or feature schema mismatch.

    ``rows`` holds 1-based data-row numbers of offending rows when known.
    """

    def __init__(self, message, rows=None):
        self.rows = list(rows) if rows is not None else []
        if self.rows:
            shown = ", ".join(str(r) for r in self.rows[:20])
            more = "" if len(self.rows) <= 20 else f" (+{len(self.rows) - 20} more)"
            message = f"{message} [rows {shown}{more}]"
        super().__init__(message)


class UnitError(InvalidInputError):
    """Grid units do not match what an aggregation expects."""


class GeometryError(InvalidInputError):
    """Grids with different shapes or coordinates combined cell-wise."""


class ModelFormatError(GPPError, ValueError):
    """A persisted model file could not be parsed.

    ``location`` names the offending place: a JSON path such as
    ``trees[3][7].thr`` or ``line 4 column 12``.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class UnsupportedVersionError(ModelFormatError):
    """Model file written with a format version this code does not read."""


class InvariantViolation(GPPError, RuntimeError):
    """An internal consistency check failed."""
