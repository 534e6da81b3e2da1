"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: usage problems exit 1, DataError
exits 2, NumericError exits 3.
"""


class AgingSynthError(Exception):
    """Base class for all library errors."""


class DataError(AgingSynthError):
    """Bad or inconsistent input data: missing files, parse failures,
    dimension mismatches, invalid field kinds."""


class NumericError(AgingSynthError):
    """Numerically degenerate input: constant volumes, zero variance,
    unbounded PSNR."""
