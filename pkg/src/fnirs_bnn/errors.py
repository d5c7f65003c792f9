"""Exception hierarchy shared across the pipeline.

The CLI maps ``ConfigError`` and ``DataFormatError`` to exit code 2
(usage/config problems) and every other ``PipelineError`` to exit code 1
(runtime/numeric failures).
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PipelineError):
    """Invalid configuration value, unknown config key, or bad argument."""


class DataFormatError(PipelineError):
    """Malformed or inconsistent input data (CSV/JSON contents)."""


class SignalTooShortError(PipelineError):
    """Signal shorter than the zero-phase filter's padding requirement."""


class InvalidIntervalError(PipelineError):
    """Baseline reference interval empty or outside the epoch."""


class InvalidWindowError(PipelineError):
    """Feature window outside the epoch's time range."""


class InsufficientDataError(PipelineError):
    """Not enough data for the requested operation (e.g. single-class ROC)."""


class DimensionMismatchError(PipelineError):
    """Array shapes inconsistent with the declared architecture/layout."""


class ModelFileError(PipelineError):
    """Model/checkpoint file is malformed or truncated."""


class VersionMismatchError(ModelFileError):
    """Model/checkpoint file written with an incompatible format version."""


class TrainingDivergedError(PipelineError):
    """ELBO or its gradient became non-finite during training."""
