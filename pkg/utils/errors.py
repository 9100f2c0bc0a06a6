"""
Exception hierarchy for SIMLab.
Library code raises these; only the command-line entry point maps them to exit codes.
"""

from typing import Any, Optional, Sequence


class SimLabError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(SimLabError, ValueError):
    """Parameter, input or group sizes do not match the model."""


class NumericError(SimLabError, ArithmeticError):
    """
    A computation produced non-finite values.

    Attributes:
        expression: Label of the offending field sub-expression, if any
        last_good: Last finite state (e.g. a partial trajectory), if any
    """

    def __init__(self, message: str, expression: Optional[str] = None, last_good: Any = None):
        super().__init__(message)
        self.expression = expression
        self.last_good = last_good


class BudgetError(SimLabError):
    """A requested computation exceeds its configured budget."""


class AmbiguityError(SimLabError):
    """
    Tolerance-based classification cannot decide a tie.

    Attributes:
        pair: Offending (i, j) neuron indices (0-based), or (i, i) for a zero-norm check
        distance: The distance that fell inside the guard band
    """

    def __init__(self, message: str, pair: Sequence[int] = (), distance: float = float("nan")):
        super().__init__(message)
        self.pair = tuple(pair)
        self.distance = distance


class NotFixedPointError(SimLabError):
    """The parameter is not fixed by the given group element."""


class NotOnManifoldError(SimLabError):
    """The starting parameter does not lie on the requested SIM."""


class ConfigError(SimLabError):
    """A run configuration is malformed or violates its schema."""


class UnknownNameError(SimLabError, KeyError):
    """A registry lookup failed."""

    def __init__(self, kind: str, name: str, available: Sequence[str]):
        self.kind = kind
        self.name = name
        self.available = list(available)
        super().__init__(f"Unknown {kind} '{name}'. Available: {', '.join(self.available)}")

    def __str__(self) -> str:
        return self.args[0]
