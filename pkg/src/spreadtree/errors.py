"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "SpreadtreeError",
    "DomainError",
    "ContractViolation",
    "HypothesisUnmet",
    "MarketSpecError",
]


class SpreadtreeError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SpreadtreeError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class ContractViolation(SpreadtreeError, ValueError):
    """A structural precondition of an operation does not hold."""


class HypothesisUnmet(SpreadtreeError):
    """The solvability prerequisites of the optimisation problem fail.

    Raised when no consistent price system can be found at any reference
    cost level below the market's transaction cost; carries the list of
    (model, cost) pairs that were attempted.
    """

    def __init__(self, message: str, attempts: list[tuple[str, float]] | None = None):
        super().__init__(message)
        self.attempts = attempts or []


class MarketSpecError(SpreadtreeError, ValueError):
    """A market specification document is malformed.

    ``path`` points at the offending field, dotted-path style
    (e.g. ``scenarios.probabilities``).
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.reason = message
