"""Exception types shared across the package."""


class McbeamError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(McbeamError):
    """A matrix required to be positive definite failed factorization."""


class ZeroMatrix(McbeamError):
    """An operation received an all-zero matrix where a nonzero one is required."""


class DimensionMismatch(McbeamError):
    """Inputs have inconsistent shapes."""


class Infeasible(McbeamError):
    """The optimization problem has no feasible point (certified or detected)."""


class InfeasibleStart(McbeamError):
    """A provided starting point violates the constraints it must satisfy."""


class RandomizationFailed(McbeamError):
    """No randomized candidate admitted a feasible power scaling."""


class TooFewAntennas(McbeamError):
    """Large-array closed form requested outside its validity range."""


class UnequalTargets(McbeamError):
    """Per-user targets differ where a common target is required."""


class ParseError(McbeamError):
    """A scenario file is malformed; the message names the offending field."""
