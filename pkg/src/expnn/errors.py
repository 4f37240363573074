"""Exception hierarchy. Every error carries a short machine-readable category
used by the CLI to emit one-line failures."""


class ExpnnError(Exception):
    category = "internal"


class ConfigError(ExpnnError):
    """Invalid configuration value (tau outside (0,1), unknown activation, ...)."""

    category = "config"


class DataError(ExpnnError):
    """Malformed or inconsistent input data."""

    category = "data"


class DimensionError(DataError):
    """Shape mismatch between arrays that must agree."""

    def __init__(self, message, expected=None, actual=None):
        if expected is not None or actual is not None:
            message = f"{message} (expected {expected}, got {actual})"
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class OptimizationError(ExpnnError):
    """Optimization aborted (non-finite risk or gradient)."""

    category = "optim"

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration
