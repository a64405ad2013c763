"""
Error hierarchy shared by every phenodesk app.

Each error class carries the process exit code the management commands use
when the error escapes a command (0 success, 1 usage/config, 2 data, 3 numeric).
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class PhenoError(Exception):
    """Base class for all pipeline errors."""

    exit_code = EXIT_DATA


class ConfigError(PhenoError):
    """Invalid run configuration, model spec or usage."""

    exit_code = EXIT_USAGE


class DataError(PhenoError):
    """Input data is missing, malformed or inconsistent."""

    exit_code = EXIT_DATA


class ShapeError(DataError, ValueError):
    """Tensor or image dimensions do not agree."""


class RasterFormatError(DataError):
    """A binary raster/model file could not be parsed."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class MetricUndefinedError(DataError):
    """A metric has no defined value for the given input."""


class NumericError(PhenoError):
    """Numerical failure: NaN loss, singular system, failed gradient check."""

    exit_code = EXIT_NUMERIC


class SingularFitError(NumericError):
    """Least-squares system is rank deficient."""


class GradientCheckError(NumericError):
    """Analytic gradients disagree with finite differences."""
