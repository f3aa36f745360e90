"""Exception types shared across the package."""


class DiscrepidError(Exception):
    """Base class for all package errors."""


class ParameterError(DiscrepidError, ValueError):
    """A function argument violates its documented precondition."""


class DimensionError(DiscrepidError, ValueError):
    """Array shapes or state/control dimensions do not agree."""


class DataError(DiscrepidError, ValueError):
    """Input data is unusable (non-finite values, malformed files, ...)."""


class InsufficientDataError(DataError):
    """Too few samples for the requested operation."""


class IntegrationDivergedError(DiscrepidError, RuntimeError):
    """Non-finite state encountered during integration.

    ``step`` is the index of the integration step that produced the
    non-finite value.
    """

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"integration diverged at step {step}")


class LibraryConflictError(DiscrepidError, ValueError):
    """Merging libraries would produce duplicate term names."""


class SingularConfigurationError(DiscrepidError, RuntimeError):
    """Mass-matrix inversion failed; unreachable for valid parameters."""


class CsvFormatError(DataError):
    """A CSV cell could not be parsed; carries 1-based row and column."""

    def __init__(self, row: int, column: int, message: str):
        self.row = row
        self.column = column
        super().__init__(message)


class ConfigError(DiscrepidError, ValueError):
    """An experiment configuration is invalid; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class ExperimentStageError(DiscrepidError, RuntimeError):
    """A multi-stage experiment failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage '{stage}': {message}")
