"""Exception hierarchy shared by every module."""


class MorreyLabError(Exception):
    """Base class for all library errors."""


class InvalidInputError(MorreyLabError, ValueError):
    """An argument violates a documented precondition."""


class OutOfRangeError(InvalidInputError):
    """Evaluation point outside the range a table or ladder covers."""


class UnsupportedDimensionError(InvalidInputError):
    """Operation is not defined in the requested dimension."""


class DivergenceError(MorreyLabError):
    """An improper integral that should be finite diverges."""


class HypothesisViolationError(MorreyLabError):
    """A theorem hypothesis fails, so the inequality is not claimed.

    Distinct from an inequality failure: the certifier refuses to run
    rather than reporting a counterexample.
    """


class InsufficientDataError(MorreyLabError):
    """Too few usable samples for a fit."""


class NoZeroSetError(MorreyLabError):
    """The zero set needed by the Poincare-type check has measure zero."""


class ConfigError(InvalidInputError):
    """Malformed experiment configuration."""
