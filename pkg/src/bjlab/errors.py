"""Exception types raised across the package."""

from __future__ import annotations


class BJLabError(Exception):
    """Base class for every error raised by :mod:`bjlab`."""


class NonConvergence(BJLabError):
    """An iterative kernel did not reach its tolerance within the iteration cap."""


class DimensionMismatch(BJLabError):
    pass


class LengthMismatch(BJLabError):
    pass


class InvalidPermutation(BJLabError):
    pass


class PartitionMismatch(BJLabError):
    pass


class NotAdmissible(BJLabError):
    """Adjacent pivot pairs share an index and may not be swapped."""


class NotCyclic(BJLabError):
    pass


class UnsupportedSize(BJLabError):
    """An exhaustive search was requested for a block count it cannot handle."""


class InvalidKind(BJLabError):
    pass


class NoWitness(BJLabError):
    pass


class WitnessInvalid(BJLabError):
    pass


class AlignmentError(BJLabError):
    pass


class UbcUnsatisfied(BJLabError):
    pass


class SweepCapExceeded(BJLabError):
    """Raised when a solver runs out of sweeps. ``partial`` holds what was computed."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class HyperbolicBreakdown(BJLabError):
    pass


class NotPositiveDefinite(BJLabError):
    pass


class LossOfOrthogonality(BJLabError):
    """The accumulated transformation drifted away from orthogonality."""
