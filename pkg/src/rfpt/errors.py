"""Exception hierarchy shared by all rfpt modules.

Each class carries the CLI exit code it maps to.
"""


class RFPTError(Exception):
    exit_code = 1


class ConfigError(RFPTError, ValueError):
    """Malformed configuration, bad flags, invalid simulation settings."""

    exit_code = 2


class ParameterError(ConfigError):
    """Family or distribution parameters outside their valid range."""


class PreconditionError(RFPTError, ValueError):
    """A mathematical precondition of the requested operation does not hold."""

    exit_code = 3


class DomainError(PreconditionError):
    """Argument outside the domain where the formula is defined."""


class AdmissibilityError(PreconditionError):
    """Gamma mixture is not in the admissible class for the given slope."""


class DivisionError(PreconditionError, ZeroDivisionError):
    pass


class NumericalError(RFPTError, ArithmeticError):
    exit_code = 4


class ConvergenceError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class MethodError(NumericalError):
    """Requested numerical method cannot be applied to the given input."""


class ConvergenceWarning(UserWarning):
    pass


class InstabilityWarning(UserWarning):
    pass
