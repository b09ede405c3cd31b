"""Exception hierarchy shared across the package."""


class FosdBoundsError(Exception):
    """Base class for all package errors."""


class DataError(FosdBoundsError, ValueError):
    """Input data cannot be used as supplied."""


class ParseError(DataError):
    """A row of an input file is malformed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SupportError(DataError):
    """The instrument takes fewer than two distinct values."""


class StratumError(DataError):
    """A (treatment, instrument) cell needed by an estimator is empty."""


class RelevanceError(FosdBoundsError, ValueError):
    """Propensities do not vary with the instrument, so no coefficient vector exists."""


class ConfigError(FosdBoundsError, ValueError):
    """Invalid configuration value."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class LpStructureError(FosdBoundsError, ValueError):
    """Linear program has inconsistent dimensions or non-finite data."""


class SolverError(FosdBoundsError, RuntimeError):
    """The simplex solver failed to terminate or lost numerical accuracy."""


class DiagnosticUnavailable(FosdBoundsError):
    """Preconditions of a diagnostic are not met by the data."""
