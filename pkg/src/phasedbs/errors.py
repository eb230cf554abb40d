"""Exception types shared across the package.

The CLI maps ``ConfigError`` to exit code 2 and ``DataError`` to exit code 3.
"""


class ConfigError(ValueError):
    """Invalid configuration or parameter combination."""


class DesignError(ConfigError):
    """A filter specification could not be met."""

    def __init__(self, message, achieved_db=None):
        super().__init__(message)
        self.achieved_db = achieved_db


class DataError(ValueError):
    """Malformed or inconsistent input data."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
