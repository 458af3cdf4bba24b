"""Exception taxonomy shared across the package.

CLI exit codes map onto these classes: input problems exit 2, exhausted
search budgets exit 3, and failed verification exits 1 (the verifier
reports rather than raises, so it has no exception here).
"""
from __future__ import annotations


class SumchaseError(Exception):
    """Base class for all package-specific errors."""


class InputError(SumchaseError, ValueError):
    """Malformed or out-of-contract input (bad indices, bad spec files, ...)."""


class PreconditionError(InputError):
    """A documented operation precondition does not hold for the given data."""


class SizeLimitError(InputError):
    """Instance exceeds a hard size limit (e.g. exhaustive search cutoffs)."""


class StructureError(InputError):
    """A family lacks the structure an operation needs (e.g. shared sign
    patterns where distinct ones are required)."""


class BudgetExhaustedError(SumchaseError, RuntimeError):
    """A search ran out of its term budget before meeting its tolerance.

    ``best`` carries the best partial result produced before giving up,
    so callers can inspect or resume from it.
    """

    def __init__(self, message: str, best: object | None = None):
        super().__init__(message)
        self.best = best


class SearchError(SumchaseError, RuntimeError):
    """An ordering search failed within its configured bound or node cap."""


class InfeasibleEtaError(SumchaseError, RuntimeError):
    """No intermediate tolerance below eps dominates the family tails.

    Signals that the input condition's tail margin was too thin to split.
    """


class DisagreementError(SumchaseError, RuntimeError):
    """Declared combination structure and the numerical growth test conflict."""
