"""Exception types shared by the package."""


class OldroydError(Exception):
    """Base class for all package errors."""


class ConfigurationError(OldroydError, ValueError):
    """Bad grid, rank, parameter or config-file contents."""


class InputError(OldroydError, ValueError):
    """Data that violates an operation's preconditions."""


class BlowUpError(OldroydError, FloatingPointError):
    """Non-finite coefficients appeared during time stepping."""

    def __init__(self, t, message=None):
        self.t = float(t)
        super().__init__(message or f"non-finite state at t={self.t:.6g}")
