"""Exception hierarchy for the rhwxva package."""


class RhwError(Exception):
    """Base class for all package errors."""


class DomainError(RhwError, ValueError):
    """Input outside the mathematical domain of an operation."""


class NegativeTime(DomainError):
    pass


class TimeOrder(DomainError):
    pass


class ZeroTime(DomainError):
    pass


class NonpositiveStrike(DomainError):
    pass


class GridMismatch(DomainError):
    pass


class EmptyGrid(DomainError):
    pass


class EmptySample(DomainError):
    pass


class Misaligned(DomainError):
    pass


class DegenerateAnnuity(DomainError):
    pass


class DuplicateNodes(DomainError):
    pass


class NotPositiveDefinite(RhwError):
    pass


class RankDeficient(RhwError):
    pass


class NoSolution(RhwError):
    """Implied-volatility inversion impossible; carries the admissible bounds."""

    def __init__(self, message, lower=None, upper=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class NoBracket(RhwError):
    pass


class MaxIterations(RhwError):
    pass


class RootBracketFailure(RhwError):
    pass


class CalibrationFailure(RhwError):
    """Calibration did not reach its target.

    Attributes
    ----------
    instrument : object
        Offending instrument, if a single one can be named.
    residual : float
        Final residual or objective value.
    trace : list
        Optional parameter trace of the optimizer.
    """

    def __init__(self, message, instrument=None, residual=None, trace=None):
        super().__init__(message)
        self.instrument = instrument
        self.residual = residual
        self.trace = trace or []


class NegativeVolRejected(CalibrationFailure):
    pass


class MissingEntry(RhwError, KeyError):
    pass


class SeedCollision(RhwError, ValueError):
    pass
