"""Exception hierarchy shared across the pipeline."""


class EopanelError(Exception):
    """Base class for all pipeline errors."""


class ConfigurationError(EopanelError):
    """Bad or missing configuration (unknown unit tag, unknown country, ...)."""


class OutOfBoundsError(EopanelError):
    """Query point falls outside the grid's spatial coverage."""


class CoverageError(EopanelError):
    """Requested date range is not covered by the dataset."""


class AlignmentError(EopanelError):
    """Two series that must share dates do not."""


class MetricError(EopanelError):
    """A season slice cannot yield metrics (all-NaN, too many gaps)."""


class ClimatologyError(EopanelError):
    """Not enough seasons to define a long-run mean/sd."""


class SingularityError(EopanelError):
    """Rank-deficient regression design."""


class InferenceError(EopanelError):
    """Design is estimable but inference is not (too few clusters)."""


class IntegrityError(EopanelError):
    """Blinding map does not match the config it claims to describe."""


class DependencyError(EopanelError):
    """A pipeline stage is missing the outputs of an earlier stage."""


class DataError(EopanelError):
    """Malformed input data (bad CSV rows, inconsistent shapes)."""
