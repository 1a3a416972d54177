"""Exception types shared across the package.

The distinction matters for callers: input errors are caller bugs, config
errors map to CLI exit code 2, numeric aborts to exit code 3.
"""


class InputError(ValueError):
    """An argument failed validation (wrong shape, non-finite entries)."""


class NotWarmedUpError(RuntimeError):
    """A windowed operation was called before two sensor readings exist."""


class NumericDomainError(ArithmeticError):
    """A matrix left the domain an operation needs (e.g. not positive definite)."""


class ConfigError(ValueError):
    """A configuration value or file is invalid."""


class NumericAbort(RuntimeError):
    """A session blew up into non-finite state and was aborted."""
