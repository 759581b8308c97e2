"""Exception hierarchy shared across the toolkit."""


class PubmoboError(Exception):
    """Base class for all toolkit errors."""


class InputError(PubmoboError):
    """Invalid arguments: wrong shapes, non-finite values, broken preconditions."""


class FactorizationError(PubmoboError):
    """Matrix could not be factorized even after jitter escalation."""

    def __init__(self, message: str, jitter: float):
        super().__init__(message)
        self.jitter = jitter


class NumericalError(PubmoboError):
    """Numerical failure in an incremental update (caller may fall back)."""


class ConfigError(PubmoboError):
    """Invalid run or experiment configuration."""


class MetricError(PubmoboError):
    """Metric undefined for the given inputs (e.g. non-positive reference utility)."""
