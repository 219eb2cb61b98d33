"""
Error hierarchy for boundlda
Every error is a ValueError so callers that only know ValueError keep working
"""

from typing import Optional


class BenchError(ValueError):
    """Base class for all boundlda errors"""


class UsageError(BenchError):
    """Bad arguments: unknown method, invalid config, impossible dimension"""


class DimensionError(UsageError):
    """Shapes that do not fit together (d > n, state vs data mismatch)"""


class DataError(BenchError):
    """Malformed or unusable input data"""


class NumericalError(BenchError):
    """Non-finite values during a solve"""

    def __init__(self, message: str, iteration: Optional[int] = None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def exit_code_for(error: Exception) -> int:
    """
    Maps an exception to the CLI exit code.

    Args:
        error: Raised exception

    Returns:
        1 for usage errors, 2 for data errors and unreadable or unwritable
        files, 3 for numerical failures
    """
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(error, (DataError, OSError)):
        return EXIT_DATA
    return EXIT_USAGE
