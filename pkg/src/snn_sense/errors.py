"""Exception hierarchy shared across the package."""


class SnnSenseError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SnnSenseError, ValueError):
    pass


class SvdConvergenceError(SnnSenseError, ArithmeticError):
    pass


class InvariantViolation(SnnSenseError):
    pass


class InfeasibleInit(SnnSenseError):
    pass


class StepBlowUp(SnnSenseError, ArithmeticError):
    """Raised when an integrator step produces a state with magnitude above the cap."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class Divergence(SnnSenseError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InsufficientData(SnnSenseError, ValueError):
    pass


class ConfigError(SnnSenseError, ValueError):
    """Bad configuration text. ``line`` is set for parse errors, ``field`` for validation errors."""

    def __init__(self, message, line=None, field=None):
        super().__init__(message)
        self.line = line
        self.field = field


class PgmError(SnnSenseError, ValueError):
    pass
