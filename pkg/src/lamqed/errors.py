"""Exception taxonomy for the toolkit.

The CLI maps these onto exit codes: configuration/data-format problems
exit with 1, numerical failures (including domain and convergence
problems hit during a computation) with 2, and I/O errors with 3.
"""


class LamqedError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(LamqedError):
    """Invalid configuration text or values (carries location info)."""


class DataFormatError(LamqedError):
    """Malformed input data file (CSV schema, units, row content)."""


class DomainError(LamqedError, ValueError):
    """Arguments outside the validity domain of a model or formula."""


class NumericalError(LamqedError):
    """A numerical procedure produced an unusable result."""


class ConvergenceError(NumericalError):
    """An iterative procedure failed to converge.

    Attributes
    ----------
    last_iterate : object or None
        Best parameter vector (or result) available when iteration stopped.
    history : list or None
        Per-iteration residual norms, when the caller tracks them.
    """

    def __init__(self, message, last_iterate=None, history=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.history = history


class MatchingError(NumericalError):
    """No matching/bracketing solution exists in the searched window."""
