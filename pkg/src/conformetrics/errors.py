"""Exception hierarchy.

The CLI maps these onto its exit codes, so library code raises the most
specific class that applies.
"""


class ConformetricsError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(ConformetricsError, ValueError):
    """Bad arguments: an empty selection, a window outside the data, etc."""


class SelectionError(UsageError):
    """A selection expression failed to parse or matched nothing."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class FormatError(ConformetricsError, ValueError):
    """Malformed structure, trajectory, report or config input."""


class ConfigError(FormatError):
    """One or more schema violations in a simulation config file."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config:\n  " + "\n  ".join(self.problems))


class NumericalError(ConformetricsError, ArithmeticError):
    """Non-finite values, degenerate geometry or an unstable integrator."""
