"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` so the CLI and the
HTTP service can emit one-line, parsable failures.
"""
from __future__ import annotations


class HydroDispatchError(Exception):
    """Base class for all package errors."""

    code = "error"

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


class ValidationError(HydroDispatchError):
    """Input violates a documented precondition or invariant."""

    code = "validation"


class NotFoundError(HydroDispatchError):
    """A referenced plant, unit, year class, or record does not exist."""

    code = "not_found"


class InsufficientDataError(HydroDispatchError):
    """Too few observations to perform the requested computation."""

    code = "insufficient_data"


class SingularityError(HydroDispatchError):
    """Degenerate inputs: constant regressor, zero variance, rank deficiency."""

    code = "singular"


class DataQualityError(HydroDispatchError):
    """Physically implausible value, e.g. efficiency far above unity."""

    code = "data_quality"


class ModelVersionError(HydroDispatchError):
    """Persisted model file has an incompatible format version."""

    code = "model_version"


class DataQualityWarning(UserWarning):
    """Suspicious but tolerated value (e.g. efficiency slightly above 1)."""
