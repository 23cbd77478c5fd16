"""Exception types raised across the package."""


class OptoQubitError(Exception):
    """Base class for all package errors."""


class KindMismatchError(OptoQubitError, ValueError):
    pass


class DimensionMismatchError(OptoQubitError, ValueError):
    pass


class SpaceMismatchError(OptoQubitError, ValueError):
    pass


class InvalidStateError(OptoQubitError, ValueError):
    """A density operator failed its Hermiticity, trace or positivity checks."""


class NullSpaceOverflowError(OptoQubitError):
    """More zero modes than the caller allowed; usually a modeling error."""


class DegenerateSteadyStateError(OptoQubitError):
    """A unique steady state was requested but the zero space is degenerate."""


class NumericalFailure(OptoQubitError):
    pass


class DegeneracyNotLiftedError(OptoQubitError):
    """The perturbation leaves the degenerate subspace untouched."""


class DefectiveProjectionError(OptoQubitError):
    """The projected 2x2 perturbation cannot be diagonalized."""


class PostselectionError(OptoQubitError):
    """The postselected outcome has (numerically) zero probability."""


class IntegrationError(OptoQubitError):
    pass


class ConvergenceError(OptoQubitError):
    pass


class AddressabilityError(OptoQubitError, ValueError):
    pass


class ConfigError(OptoQubitError, ValueError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
