"""Exception and warning classes.

Every error carries a short machine-readable ``code`` (the class name) so the
command line can print ``error: <code>: <message>`` and map the failure to an
exit status. Input problems derive from :class:`ValidationError` (exit 1);
failures of the numerical routines derive from :class:`NumericError` (exit 2).
"""

from __future__ import annotations


class SponsorSurvError(Exception):
    """Base class for all package errors."""

    exit_code = 1

    @property
    def code(self) -> str:
        return type(self).__name__


class ValidationError(SponsorSurvError, ValueError):
    exit_code = 1


class NumericError(SponsorSurvError, ArithmeticError):
    exit_code = 2


# -- panel data -------------------------------------------------------------


class EmptyInput(ValidationError):
    pass


class MissingColumn(ValidationError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"required column {column!r} is missing from the header")


class BadEnumToken(ValidationError):
    def __init__(self, row: int, column: str, token: str):
        self.row, self.column, self.token = row, column, token
        super().__init__(f"row {row}: {token!r} is not a valid value for {column!r}")


class InvalidValue(ValidationError):
    def __init__(self, row: int, column: str, detail: str):
        self.row, self.column = row, column
        super().__init__(f"row {row}: column {column!r} {detail}")


class NonContiguousPeriods(ValidationError):
    def __init__(self, sponsorship_id: str):
        self.sponsorship_id = sponsorship_id
        super().__init__(
            f"sponsorship {sponsorship_id!r} does not cover periods 1..d without gaps or duplicates"
        )


class EventNotTerminal(ValidationError):
    def __init__(self, sponsorship_id: str):
        self.sponsorship_id = sponsorship_id
        super().__init__(
            f"sponsorship {sponsorship_id!r} has an event before its final period"
        )


class UnknownBlockColumn(ValidationError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"block specification names unknown column {column!r}")


class DegenerateDesign(ValidationError):
    """Raised when a design matrix with zero-variance columns is fitted."""


# -- nonparametric ----------------------------------------------------------


class EmptySpells(ValidationError):
    pass


class BadBandwidth(ValidationError):
    pass


class MedianUndefined(NumericError):
    exit_code = 2


# -- cox fitting ------------------------------------------------------------


class NoEvents(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NonIdentifiable(NumericError):
    pass


class MonotoneLikelihood(NumericError):
    pass


class NotConverged(NumericError):
    pass


class SingularInformation(NumericError):
    pass


# -- forecasting ------------------------------------------------------------


class ProfileDimensionMismatch(ValidationError):
    pass


# -- synthetic data ---------------------------------------------------------


class HazardOverflow(ValidationError):
    pass


class TooManyColumns(ValidationError):
    pass


# -- warnings ---------------------------------------------------------------


class DegenerateColumnWarning(UserWarning):
    """A design column has zero variance."""


class HorizonTooShort(UserWarning):
    """The survivor curve is still above .05 at the forecast horizon."""
