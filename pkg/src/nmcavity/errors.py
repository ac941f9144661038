"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class NmcavityError(Exception):
    exit_code = 4


class ConfigError(NmcavityError, ValueError):
    """Malformed or unknown configuration input."""

    exit_code = 2


class RegimeError(NmcavityError, ValueError):
    """Parameters outside the regime an operation supports.

    ``regime`` names the regime that was detected (for instance
    ``"bound_modes"`` or ``"critical_detuned"``) when known.
    """

    exit_code = 3

    def __init__(self, message, regime=None):
        super().__init__(message)
        self.regime = regime


class HorizonError(RegimeError):
    """Requested simulation time exceeds the truncation validity horizon."""


class CapabilityError(RegimeError):
    """A spectrum lacks a capability the operation needs (e.g. continuation)."""


class NumericalError(NmcavityError, ArithmeticError):
    exit_code = 4


class QuadratureError(NumericalError):
    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class RootFindingError(NumericalError):
    def __init__(self, message, last=None, residual=None):
        super().__init__(message)
        self.last = last
        self.residual = residual
