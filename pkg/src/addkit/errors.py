"""Exception and warning types raised across addkit."""


class AddkitError(Exception):
    """Base class for all library errors."""


class ConfigError(AddkitError, ValueError):
    """Malformed family or run configuration."""


class DomainError(AddkitError, ValueError):
    """Point dimension does not match the family dimension."""


class ReversedTimeError(AddkitError, ValueError):
    pass


class MissingDerivativeError(AddkitError):
    """The time profile has no derivative, so q(t, xi) is unavailable."""


class DegenerateFamilyError(AddkitError, ValueError):
    """Base exponent vanishes away from the origin."""


class ReferenceNotPositiveError(AddkitError, ZeroDivisionError):
    pass


class WeightSumError(AddkitError, ValueError):
    pass


class EvaluationError(AddkitError, FloatingPointError):
    """A function produced a non-finite value where a finite one is required."""


class InsufficientDecayError(AddkitError):
    """The spectrum is not small enough at the frequency cutoff of the grid."""


class StepUnderflowError(AddkitError, FloatingPointError):
    pass


class UnboundedBallError(AddkitError):
    pass


class ZeroVolumeError(AddkitError):
    pass


class GridMismatchError(AddkitError, ValueError):
    pass


class NonNormalizedTableError(AddkitError, ValueError):
    pass


class AssumptionViolationError(AddkitError):
    """Raised when a multiplier needed for sampling is not positive definite."""


class UnimodalityWarning(UserWarning):
    """A density ratio p(x)/p(0) exceeded one, so the mode is not at the origin."""
