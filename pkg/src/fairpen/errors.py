"""Exception types shared across the package."""


class FairpenError(Exception):
    """Base class for all package errors."""


class DimensionError(FairpenError):
    """Shapes of inputs are incompatible."""


class StateError(FairpenError):
    """Operation called in the wrong lifecycle state (e.g. backward before forward)."""


class ConfigError(FairpenError):
    """Invalid training or run configuration."""


class IngestionError(FairpenError):
    """CSV/schema ingestion failure; message names the offending row/column."""


class DegenerateMetricError(FairpenError):
    """A fairness metric hit an empty group or a zero denominator rate."""


class UndefinedMetricError(FairpenError):
    """Metric is undefined for the given labels (e.g. AUC with a single class)."""


class CheckpointError(FairpenError):
    """Checkpoint file is missing, corrupted, or incompatible."""
