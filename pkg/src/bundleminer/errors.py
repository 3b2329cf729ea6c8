"""Exception hierarchy shared across the pipeline.

Exit codes match the CLI contract: 1 usage, 2 data, 3 internal.
"""


class BundleMinerError(Exception):
    exit_code = 3


class UsageError(BundleMinerError):
    """Bad arguments or configuration, detected before any output is written."""

    exit_code = 1


class DataError(BundleMinerError):
    """Malformed or missing input data / artifacts."""

    exit_code = 2


class InternalError(BundleMinerError):
    """An internal invariant was violated; indicates a bug."""

    exit_code = 3
