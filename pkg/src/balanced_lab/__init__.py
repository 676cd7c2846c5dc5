"""Weighted Bergman kernels, ε-functions and balanced-metric checks on Hartogs domains."""

from .errors import BalancedLabError, InvalidInputError, NumericalFailure
from .profile import DomainPoint, HartogsProfile, builtin

__version__ = "0.1.0"

__all__ = [
    "BalancedLabError",
    "DomainPoint",
    "HartogsProfile",
    "InvalidInputError",
    "NumericalFailure",
    "builtin",
]
