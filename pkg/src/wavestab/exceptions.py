"""Exception hierarchy shared by every module."""


class WavestabError(Exception):
    """Base class for all errors raised by the package."""


class ParameterError(WavestabError, ValueError):
    """A scalar parameter is out of its admissible range."""


class ContractError(WavestabError, ValueError):
    """An operation precondition does not hold (wrong frame, missing field, ...)."""


class GridError(WavestabError, ValueError):
    """Grids of two objects are incompatible or too coarse."""


class DomainError(WavestabError, ValueError):
    """A function was evaluated outside its domain."""


class ConfigError(WavestabError, ValueError):
    """Malformed or incomplete configuration."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class FitError(WavestabError, ValueError):
    """Not enough usable samples for a decay fit."""


class NumericalError(WavestabError, ArithmeticError):
    """NaN, overflow or a singular system was encountered."""


class InstabilityError(NumericalError):
    """A time integration blew up."""


class DivergenceError(NumericalError):
    """A fixed-point iteration produced non-finite values."""


class IterationLimitError(WavestabError, RuntimeError):
    """An iteration did not converge within its budget."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NoBracketError(WavestabError, RuntimeError):
    """A scalar root could not be bracketed."""

    def __init__(self, message, scan=None):
        super().__init__(message)
        self.scan = scan


class ToleranceError(WavestabError, RuntimeError):
    """A requested tolerance could not be reached."""


class ConvergenceError(WavestabError, RuntimeError):
    """A parameter sweep failed its Cauchy test."""
