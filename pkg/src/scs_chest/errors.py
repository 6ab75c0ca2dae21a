"""Exception types shared across the package."""

import numpy as np


class InvalidSpecError(ValueError):
    """A channel specification violates one of its invariants."""


class InvalidArgumentError(ValueError):
    """An operation was called with arguments outside its domain."""


class SingularSystemError(np.linalg.LinAlgError):
    """A least-squares system restricted to a support is rank deficient.

    Attributes
    ----------
    support : tuple of int
        The 1-based tap indices whose columns were rank deficient.
    """

    def __init__(self, message, support=()):
        super().__init__(message)
        self.support = tuple(int(s) for s in support)


class ConfigError(ValueError):
    """An experiment configuration is invalid.

    ``problems`` lists every violated constraint, not only the first one.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))
