class EnkbfError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgumentError(EnkbfError, ValueError):
    pass


class IllConditionedProjectionError(EnkbfError, ValueError):
    """Raised when a grid is too coarse to resolve the requested number of modes."""


class DivergenceError(EnkbfError, FloatingPointError):
    """Non-finite ensemble values after an update; usually the step size is too large."""


class WellPosednessError(EnkbfError, ArithmeticError):
    pass


class ProbeUndefinedError(EnkbfError, RuntimeError):
    pass


class ConfigError(EnkbfError, ValueError):
    pass
