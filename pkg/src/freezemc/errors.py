"""Exception types shared across the package."""

from __future__ import annotations


class FreezeMCError(Exception):
    """Base class for all package errors."""


class GeneratorError(FreezeMCError, ValueError):
    """Invalid generator matrix."""


class NegativeOffDiagonalError(GeneratorError):
    """Some off-diagonal rate is negative."""


class RowSumNotZeroError(GeneratorError):
    """Raw rows do not sum to zero within tolerance."""


class RowSumOutOfRangeError(GeneratorError):
    """Some diagonal entry is below -1, so Id + q is not a stochastic matrix."""


class DecomposableError(GeneratorError):
    """The generator has more than one recurrent class."""


class NotIrreducibleError(GeneratorError):
    """Operation requires an irreducible generator."""


class SingularBeyondNullSpaceError(GeneratorError):
    """Linear system is rank-deficient beyond the expected one-dimensional null space."""


class ScheduleError(FreezeMCError, ValueError):
    """Invalid freezing schedule or schedule query."""


class UnsupportedRegimeError(ScheduleError):
    """The requested quantity is not defined in the schedule's regime."""


class UnstableEstimateError(ScheduleError):
    """A numeric limsup estimate did not stabilize."""


class RemainderBoundError(ScheduleError):
    """A remainder evaluation violates its declared bound."""


class InvalidRowError(FreezeMCError):
    """A freezing transition row is not a probability vector at some step.

    Carries the offending schedule index and, when available, the first
    index from which all rows are valid.
    """

    def __init__(self, message: str, n: int, suggested_n0: int | None = None):
        super().__init__(message)
        self.n = n
        self.suggested_n0 = suggested_n0


class NotPSDError(FreezeMCError, ValueError):
    """Matrix is not positive semidefinite within tolerance."""


class ConfigError(FreezeMCError, ValueError):
    """Invalid run configuration."""
