"""Exception and warning types raised across the package."""


class SSPLMMError(Exception):
    """Base class for all package errors."""


class NonPositiveStep(SSPLMMError, ValueError):
    pass


class DomainError(SSPLMMError, ValueError):
    pass


class InfeasibleOrder(SSPLMMError):
    """No formula of the requested order has a positive SSP coefficient.

    ``threshold`` is the value ``Omega_k`` must exceed.
    """

    def __init__(self, message, threshold=None):
        super().__init__(message)
        self.threshold = threshold


class OutsideOptimalWindow(UserWarning):
    """Third-order formula is valid but no longer optimal."""


class EmptyHistory(SSPLMMError, ValueError):
    pass


class InvalidFe(EmptyHistory):
    pass


class StartupFailure(SSPLMMError, RuntimeError):
    pass


class NonFiniteState(SSPLMMError, FloatingPointError):
    pass


class NonPhysicalState(SSPLMMError, FloatingPointError):
    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class LengthMismatch(SSPLMMError, ValueError):
    pass


class EmptyTrajectory(SSPLMMError, ValueError):
    pass


class ConfigError(SSPLMMError, ValueError):
    pass
