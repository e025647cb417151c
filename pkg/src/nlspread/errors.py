"""Exception types shared across the package."""


class NlspreadError(Exception):
    """Base class for package errors."""


class ConfigError(NlspreadError, ValueError):
    """Invalid configuration (bad keys, values out of range)."""


class ConvergenceError(NlspreadError, RuntimeError):
    """An iterative solver failed to converge."""


class PreconditionError(NlspreadError, ValueError):
    """An experiment was requested outside the regime where it applies."""
