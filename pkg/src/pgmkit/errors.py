"""Exception types raised across the library.

Every error carries a human-readable message; the CLI maps PgmError
subclasses to exit code 1 and usage problems to exit code 2.
"""


class PgmError(Exception):
    """Base class for all library errors."""


class ValidationError(PgmError):
    """A domain object violates one of its invariants."""


class ParseError(PgmError):
    """Malformed input text (BIF, JSON, CSV)."""


class FormatError(PgmError):
    """Unknown or unsupported serialization target."""


class TableTooLargeError(PgmError):
    """A table operation would exceed the configured size cap."""


class ScopeViolationError(PgmError):
    """An operation referenced a variable outside a table's scope."""


class InconsistentCalibrationError(PgmError):
    """Pointwise division hit a positive-by-zero entry."""


class ZeroMassError(PgmError):
    """A table with zero total mass where positive mass is required."""


class ImpossibleEvidenceError(ZeroMassError):
    """Evidence with zero probability under the model."""


class AllSamplesRejectedError(PgmError):
    """Rejection sampling kept no samples."""


class ZeroTotalWeightError(PgmError):
    """Importance sampling produced only zero weights."""


class ExtensionError(PgmError):
    """A partially directed graph admits no consistent DAG extension."""
