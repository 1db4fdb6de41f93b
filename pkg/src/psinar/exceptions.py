"""Exception types raised by the library.

The CLI maps these onto exit codes, so keep the hierarchy shallow.
"""


class PsinarError(Exception):
    """Base class for all library errors."""


class InputError(PsinarError, ValueError):
    """Malformed or inadmissible input data."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateSeriesError(InputError):
    """The series carries no information for the requested estimator."""


class EstimationError(PsinarError):
    """An estimator could not produce a usable result."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConvergenceError(PsinarError):
    """An iterative routine stopped before reaching its tolerance."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual
