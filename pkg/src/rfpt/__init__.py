"""Randomized first-passage times of Brownian motion: find the law of a random
starting point X so that the first time W_t + X reaches a boundary b(t) has a
prescribed density."""

from .boundaries import General, Linear, Quadratic, Sqrt, Zero, parse_boundary
from .errors import (AdmissibilityError, ConfigError, ConvergenceWarning, DomainError,
                     InstabilityWarning, NumericalError, PreconditionError, RFPTError)
from .targets import Exponential, GammaMixture, GeneralDensity, gamma_density, parse_target

__version__ = "0.1.0"

__all__ = [
    "General", "Linear", "Quadratic", "Sqrt", "Zero", "parse_boundary",
    "AdmissibilityError", "ConfigError", "ConvergenceWarning", "DomainError",
    "InstabilityWarning", "NumericalError", "PreconditionError", "RFPTError",
    "Exponential", "GammaMixture", "GeneralDensity", "gamma_density", "parse_target",
]
