"""Custom exceptions for the vintage-sparse-pca package.

Every exception carries an ``exit_code`` that the command-line interface returns
when the exception escapes a subcommand:

- 1: usage and configuration problems
- 2: bad input data (parse errors, dimension mismatches, invalid model specs)
- 3: numerical failures (rank deficiency, degenerate distributions)
"""

from typing import Any


class VspError(Exception):
    """Base exception for all vintage-sparse-pca errors."""

    exit_code: int = 1


class ConfigurationError(VspError):
    """Exception raised when flags or configuration values are inconsistent."""

    exit_code = 1

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        """Initialize the exception.

        Args:
            message: Error message
            details: Additional error details

        """
        self.details = details or {}
        super().__init__(message)


class SizeGuardError(ConfigurationError):
    """Exception raised when a dense or combinatorial operation would be too large."""

    def __init__(self, what: str, size: int, limit: int) -> None:
        """Initialize the exception.

        Args:
            what: Name of the guarded operation
            size: Requested size
            limit: Largest permitted size

        """
        self.what = what
        self.size = size
        self.limit = limit
        super().__init__(
            f"{what}: size {size} exceeds the guard limit {limit}",
            {"size": size, "limit": limit},
        )


class DataError(VspError):
    """Base exception for invalid input data."""

    exit_code = 2


class MatrixFormatError(DataError):
    """Exception raised when a matrix file cannot be parsed."""

    def __init__(self, path: str, line_number: int | None, reason: str) -> None:
        """Initialize the exception.

        Args:
            path: Path of the offending file
            line_number: 1-based line number of the offending line, if known
            reason: Reason for the failure

        """
        self.path = path
        self.line_number = line_number
        self.reason = reason
        location = f"{path}:{line_number}" if line_number is not None else path
        super().__init__(f"Failed to parse matrix file {location}: {reason}")


class DimensionMismatchError(DataError):
    """Exception raised when array or operator dimensions do not agree."""

    def __init__(self, what: str, expected: object, actual: object) -> None:
        """Initialize the exception.

        Args:
            what: Description of the checked quantity
            expected: Expected dimension or shape
            actual: Dimension or shape that was supplied

        """
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"Dimension mismatch for {what}: expected {expected}, got {actual}")


class ValidationError(DataError):
    """Exception raised when a domain object violates its invariants."""

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        """Initialize the exception.

        Args:
            message: Error message
            details: Additional error details

        """
        self.details = details or {}
        super().__init__(message)


class ModelSpecError(DataError):
    """Exception raised when a model specification is malformed or infeasible."""


class EdgeProbabilityError(ModelSpecError):
    """Exception raised when a Bernoulli mean falls outside [0, 1]."""

    def __init__(self, row: int, col: int, value: float) -> None:
        """Initialize the exception.

        Args:
            row: Row index of the offending expectation entry
            col: Column index of the offending expectation entry
            value: The offending expectation value

        """
        self.row = row
        self.col = col
        self.value = value
        super().__init__(
            f"Edge probability {value:.6g} at ({row}, {col}) is outside [0, 1]; "
            "lower rho or the entries of B"
        )


class ScalingError(DataError):
    """Exception raised when a matrix cannot be degree-normalized."""


class ReportError(DataError):
    """Exception raised for malformed manifests, reports or CSV files."""


class NumericalError(VspError):
    """Base exception for numerical failures."""

    exit_code = 3


class RecenteringError(NumericalError):
    """Exception raised when the factor means cannot be estimated."""


class DegenerateDistributionError(NumericalError):
    """Exception raised when a kurtosis is requested for a zero-variance law or sample."""


class DegenerateTopicError(NumericalError):
    """Exception raised when a topic loading row has zero l1 norm."""
