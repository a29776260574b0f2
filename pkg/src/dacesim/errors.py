"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid configuration (bad sizes, parameters out of range)."""


class InputShapeError(ValueError):
    """Input arrays with the wrong length or shape."""


class SingularSystemError(ArithmeticError):
    """Normal matrix of an estimation problem is numerically singular."""

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = indices


class UndefinedMetricError(ValueError):
    """Metric is undefined for the given input (e.g. PAPR of a zero vector)."""
