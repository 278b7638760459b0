"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: divergence -> 1,
schedule validation failure -> 2, usage or config mistakes -> 3.
"""


class UsageError(ValueError):
    """Bad arguments, malformed config, or an inapplicable algorithm choice."""


class ScheduleValidationError(RuntimeError):
    """A parameter schedule failed its constraint sweep."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DivergenceError(RuntimeError):
    """An iterate became NaN or Inf.

    Carries the last finite solver state and, when raised from a driver,
    the partial convergence record accumulated so far.
    """

    def __init__(self, message, state=None, record=None):
        super().__init__(message)
        self.state = state
        self.record = record
