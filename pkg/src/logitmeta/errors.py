"""Exception types shared across the package.

The CLI maps each class to a process exit code.
"""


class InputError(ValueError):
    """Malformed or out-of-range user input."""

    exit_code = 2


class CapError(InputError):
    """A size or enumeration cap would be exceeded."""

    exit_code = 3


class PreconditionError(InputError):
    """An analysis was asked of an object lacking a required ingredient."""

    exit_code = 2


class NumericalError(RuntimeError):
    """An iterative routine failed to reach its tolerance."""

    exit_code = 4


class LimitReached(RuntimeError):
    """A step budget ran out before the stopping condition held.

    ``lower_bound`` is a certified lower bound on the quantity sought.
    """

    def __init__(self, message, lower_bound):
        super().__init__(message)
        self.lower_bound = lower_bound
