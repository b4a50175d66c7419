"""Exception types shared across the pipeline.

The CLI maps these to exit codes: DataError -> 2, NumericalError -> 3.
"""


class DataError(Exception):
    """An input file is missing, malformed, or internally inconsistent."""


class NumericalError(RuntimeError):
    """Training produced a non-finite value and was aborted."""
