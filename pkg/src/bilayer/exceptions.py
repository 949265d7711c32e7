"""Exception types raised by the simulator."""


class BilayerError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(BilayerError, ValueError):
    """Non-finite or otherwise malformed numerical input."""


class ShapeError(BilayerError, ValueError):
    """Array lengths do not match the grid."""


class DomainError(BilayerError, ValueError):
    """Argument outside the domain of a function (e.g. s <= 0 for a potential)."""


class ConfigError(BilayerError, ValueError):
    """Invalid configuration.

    ``errors`` holds one ``"field.path: message"`` string per violation.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NotApplicableError(BilayerError):
    """Quantity is undefined for the requested model (e.g. barrier without forces)."""


class NewtonDivergedError(BilayerError):
    """Newton iteration failed to reduce the residual."""


class DtUnderflowError(BilayerError):
    """Adaptive step size fell below ``dt_min``."""

    def __init__(self, message, t=None, dt=None):
        super().__init__(message)
        self.t = t
        self.dt = dt


class PreconditionError(BilayerError, ValueError):
    """A study was asked to run on a scenario it does not apply to."""
