"""Exception hierarchy for balanced-lab.

Invalid input (bad points, bad weights, bad configs) and numerical failure are
kept apart because the CLI maps them to different exit codes.
"""

from typing import Any, Optional


class BalancedLabError(Exception):
    """Base class for all balanced-lab errors."""


class InvalidInputError(BalancedLabError, ValueError):
    """The caller asked for something outside the admissible inputs."""


class DomainError(InvalidInputError):
    """A point or argument lies outside the domain of the operation."""


class ExpressionDomainError(DomainError):
    """An expression was evaluated outside its numeric domain."""


class TrivialSpaceError(InvalidInputError):
    """The weighted Bergman space is {0} because m <= n."""

    def __init__(self, m: int, n: int):
        super().__init__(f"weighted Bergman space is trivial for m={m} <= n={n}")
        self.m = m
        self.n = n


class ExpressionSyntaxError(InvalidInputError):
    """Parse failure at a byte offset of the expression text."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExpressionSyntaxError):
    """An identifier that is neither the variable nor a known function."""


class ConfigError(InvalidInputError):
    """Malformed configuration file or unknown profile."""


class NumericalFailure(BalancedLabError, ArithmeticError):
    """A numerical procedure did not reach its tolerance.

    ``partial`` carries whatever was computed before giving up.
    """

    def __init__(self, message: str, partial: Optional[Any] = None):
        super().__init__(message)
        self.partial = partial


class ExpressionOverflowError(NumericalFailure):
    """Floating point overflow while evaluating an expression."""


class QuadratureFailure(NumericalFailure):
    """Adaptive quadrature gave up above tolerance or met a NaN."""
