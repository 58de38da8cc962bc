"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ``InputError`` -> 2,
``InfeasibleError`` -> 1, ``GuardExceededError`` -> 3.
"""


class PlanChainError(Exception):
    """Base class for all package errors."""


class InputError(PlanChainError):
    """Malformed or semantically invalid input data."""


class InfeasibleError(PlanChainError):
    """The requested problem has no feasible solution."""


class GuardExceededError(PlanChainError):
    """An intentional size guard was exceeded."""


class InternalSolverError(PlanChainError):
    """A solver produced a state that should be unreachable."""
