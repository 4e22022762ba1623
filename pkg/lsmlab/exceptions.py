class LsmLabError(Exception):
    """Base class for errors raised by lsmlab."""


class ConfigurationError(LsmLabError):
    """Bad settings, experiment file or command-line input."""


class ValidationError(LsmLabError, ValueError):
    """A domain input violates an operation's precondition."""


class NumericalError(LsmLabError):
    """A computation cannot proceed (rank-0 regression, non-PSD correlation, ...)."""
