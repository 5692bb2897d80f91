"""Exception types shared across the package."""


class DriftlabError(Exception):
    """Base class for package errors."""


class DomainError(DriftlabError, ValueError):
    """An argument lies outside the domain of an operation."""


class DimensionError(DriftlabError, ValueError):
    """Operation not defined in the requested dimension."""


class GridMismatchError(DriftlabError, ValueError):
    """Two fields or a field and a plan live on different grids."""


class SingularityError(DriftlabError, ValueError):
    """Kernel evaluated on the diagonal."""


class IterationError(DriftlabError, RuntimeError):
    """An iterative solver did not converge.

    Attributes
    ----------
    residual : float
        Relative residual at the last iterate.
    iterations : int
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class PreconditionError(DriftlabError, ValueError):
    """Input violates a documented precondition."""


class CadenceError(DriftlabError, ValueError):
    """Snapshots too sparse in time for the requested diagnostic."""


class HypothesisViolation(DriftlabError, ValueError):
    """Parameters outside the range where an inequality is stated."""


class ConfigError(DriftlabError, ValueError):
    """Invalid run configuration. ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        if key and key not in message:
            message = f"{key}: {message}"
        super().__init__(message)
        self.key = key


class NumericalError(DriftlabError, RuntimeError):
    """Non-finite values or a failed stability guard during time stepping."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class CFLError(NumericalError):
    """Step rejected by the advective CFL check."""

    def __init__(self, message, suggested_dt, last_state=None):
        super().__init__(message, last_state)
        self.suggested_dt = suggested_dt


class PrecisionWarning(UserWarning):
    """A result is computed outside the regime where its error estimate holds."""
