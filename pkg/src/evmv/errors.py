"""Exception hierarchy shared across the package.

DataError and NumericError are the two branches the CLI maps to distinct
exit codes (3 and 4); everything else is a plain EvmvError.
"""


class EvmvError(Exception):
    pass


class DataError(EvmvError):
    """Unreadable, malformed, or inconsistent input data."""


class DataFormatError(DataError):
    """Bad magic, truncated payload, or header/payload mismatch."""


class DimensionError(DataError):
    """Shape or class-count mismatch between components."""


class StratificationError(DataError):
    """A class is too small to be split across all partitions."""


class NumericError(EvmvError):
    """Domain violation or numerically unrepresentable result."""


class InvalidEvidenceError(NumericError):
    """Evidence vector with negative or non-finite entries."""


class DomainError(NumericError):
    """Special-function argument outside the supported domain."""


class TotalConflictError(NumericError):
    """Dempster combination with normalizer 1 - kappa below tolerance."""


class InfiniteStrengthError(NumericError):
    """Opinion with zero uncertainty cannot map to finite Dirichlet strength."""


class UndefinedMetricError(NumericError):
    """Metric undefined for the given inputs (e.g. single-class AUROC)."""
