"""Exception hierarchy.

Validation problems (bad input, violated preconditions) derive from
``ValidationError``; numerical breakdowns (singular models, failed fits)
derive from ``NumericalError``. The CLI maps the two families to distinct
exit codes.
"""


class HypergrowthError(Exception):
    """Base class for all package errors."""


class ValidationError(HypergrowthError, ValueError):
    """Input data or arguments violate a documented precondition."""


class ParseError(ValidationError):
    """A CSV row could not be read."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"{message}, line {line}"
        super().__init__(message)


class UnderdeterminedError(ValidationError):
    """Too few observations for the requested fit."""


class NumericalError(HypergrowthError, ArithmeticError):
    """A computation could not produce a valid numerical result."""


class SingularityError(NumericalError):
    """A hyperbolic denominator is non-positive where it was evaluated."""


class PositivityError(NumericalError):
    """A fitted hyperbolic model is not positive over its domain."""


class BootstrapUnstableError(NumericalError):
    """Too many bootstrap resamples had to be skipped."""
