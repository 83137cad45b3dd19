"""Exception types mapped to CLI exit codes by the harness."""


class MarginBenchError(Exception):
    """Base class for package errors."""


class ConfigError(MarginBenchError):
    """Bad configuration or usage (exit code 1)."""


class DataError(MarginBenchError):
    """Unreadable or invalid input data (exit code 2)."""


class NumericError(MarginBenchError):
    """Numerical failure, e.g. diverged training (exit code 3)."""
