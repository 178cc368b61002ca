"""Exception types shared across the package."""


class StacknashError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(StacknashError):
    """A configuration value violates a documented invariant."""


class ConstructionError(StacknashError):
    """A weight-function construction precondition failed; names the property."""


class ResourceLimitError(StacknashError):
    """A requested computation exceeds the configured budget."""


class PicardDivergenceError(StacknashError):
    """The decoupling iteration diverged (distance grew repeatedly).

    Carries the iterate-distance history so callers can inspect the run.
    """

    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


class CoercivityError(StacknashError):
    """CG on the follower operator equation failed; suggests larger beta."""
