"""
Custom exceptions and error handling for budgetmech package.

This module provides specific exception types for better error handling
and debugging across the solver, rounding, and mechanism modules.
"""

from typing import Any, Dict, List, Optional, Union


class BudgetMechError(Exception):
    """Base exception for all budgetmech-specific errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(message)

    def __str__(self) -> str:
        if self.details:
            return f"{self.message} (Details: {self.details})"
        return self.message


class InstanceValidationError(BudgetMechError):
    """Raised when a problem instance is malformed."""

    def __init__(self, field: str, reason: str, value: Optional[Any] = None):
        self.field = field
        self.reason = reason
        self.value = value

        message = f"Instance validation failed for '{field}': {reason}"
        details: Dict[str, Any] = {"field": field, "reason": reason}

        if value is not None:
            details["value"] = value

        super().__init__(message, details)


class NotNormalizedError(BudgetMechError):
    """Raised when an operation needs a normalized instance and got a raw one."""

    def __init__(self, operation: str):
        self.operation = operation
        super().__init__(
            f"'{operation}' requires a normalized instance; call normalize() first",
            {"operation": operation},
        )


class InvalidAllocationError(BudgetMechError):
    """Raised when an allocation does not fit its instance or is self-inconsistent."""

    def __init__(self, reason: str, item: Optional[int] = None):
        self.reason = reason
        self.item = item

        message = f"Invalid allocation: {reason}"
        details: Dict[str, Any] = {"reason": reason}
        if item is not None:
            message += f" (item {item})"
            details["item"] = item

        super().__init__(message, details)


class SizeLimitError(BudgetMechError):
    """Raised when a problem exceeds a configured size cap."""

    def __init__(self, operation: str, size: Union[int, float], limit: Union[int, float]):
        self.operation = operation
        self.size = size
        self.limit = limit

        super().__init__(
            f"{operation} exceeds size limit: {size} > {limit}",
            {"operation": operation, "size": size, "limit": limit},
        )


class LpError(BudgetMechError):
    """Errors related to linear program construction or solving."""

    pass


class LpFormatError(LpError):
    """Raised when a linear program references invalid variables or bounds."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Malformed linear program: {reason}", {"reason": reason})


class IterationLimitError(LpError):
    """Raised when the simplex method does not terminate within the pivot budget."""

    def __init__(self, iterations: int, phase: str):
        self.iterations = iterations
        self.phase = phase
        super().__init__(
            f"Simplex {phase} stopped after {iterations} pivots",
            {"iterations": iterations, "phase": phase},
        )


class InfeasibleError(BudgetMechError):
    """Raised when an operation needs a feasible problem and the problem has none."""

    def __init__(self, operation: str, reason: str):
        self.operation = operation
        self.reason = reason
        super().__init__(
            f"{operation} is infeasible: {reason}", {"operation": operation, "reason": reason}
        )


class RoundingError(BudgetMechError):
    """Raised when a fractional solution handed to a rounding step breaks its preconditions."""

    def __init__(self, reason: str, details: Optional[Dict[str, Any]] = None):
        self.reason = reason
        merged = {"reason": reason}
        merged.update(details or {})
        super().__init__(f"Rounding precondition violated: {reason}", merged)


class GuaranteeViolationError(BudgetMechError):
    """Raised when a proven bound fails to hold on a concrete run."""

    def __init__(self, guarantee: str, observed: Any, bound: Any):
        self.guarantee = guarantee
        self.observed = observed
        self.bound = bound
        super().__init__(
            f"Guarantee '{guarantee}' violated: observed {observed}, bound {bound}",
            {"guarantee": guarantee, "observed": str(observed), "bound": str(bound)},
        )


class MechanismError(BudgetMechError):
    """Errors related to priors and mechanisms."""

    pass


class PriorValidationError(MechanismError):
    """Raised when a prior is malformed."""

    def __init__(self, reason: str, bidder: Optional[int] = None):
        self.reason = reason
        self.bidder = bidder

        message = f"Invalid prior: {reason}"
        details: Dict[str, Any] = {"reason": reason}
        if bidder is not None:
            message += f" (bidder {bidder})"
            details["bidder"] = bidder

        super().__init__(message, details)


class OffSupportTypeError(MechanismError):
    """Raised when a reported type is not in the bidder's type space."""

    def __init__(self, bidder: int, type_index: Any, available: int):
        self.bidder = bidder
        self.type_index = type_index
        self.available = available
        super().__init__(
            f"Bidder {bidder} reported type {type_index}, but only {available} types exist",
            {"bidder": bidder, "type_index": type_index, "available": available},
        )


class SerializationError(BudgetMechError):
    """Raised when JSON input/output fails."""

    def __init__(self, operation: str, reason: str, data: Optional[str] = None):
        self.operation = operation  # "serialize" or "deserialize"
        self.reason = reason
        self.data = data

        message = f"JSON {operation} failed: {reason}"
        details = {"operation": operation, "reason": reason}

        if data:
            details["data_preview"] = data[:100] + "..." if len(data) > 100 else data

        super().__init__(message, details)


class ConfigurationError(BudgetMechError):
    """Errors related to solver configuration."""

    def __init__(self, reason: str, allowed: Optional[List[str]] = None):
        self.reason = reason
        details: Dict[str, Any] = {"reason": reason}
        if allowed:
            details["allowed"] = allowed
        super().__init__(f"Configuration error: {reason}", details)


def handle_json_error(
    error: Exception, operation: str, data: Optional[str] = None
) -> SerializationError:
    """
    Convert JSON and schema errors to SerializationError with better context.

    Args:
        error: The original error
        operation: "serialize" or "deserialize"
        data: The data that caused the error (optional)

    Returns:
        SerializationError with improved error message
    """
    import json

    import jsonschema

    reason = str(error)

    if isinstance(error, json.JSONDecodeError):
        reason = f"Invalid JSON format at line {error.lineno}, column {error.colno}: {error.msg}"
    elif isinstance(error, jsonschema.ValidationError):
        location = "/".join(str(part) for part in error.absolute_path) or "<root>"
        reason = f"Schema violation at {location}: {error.message}"
    elif isinstance(error, TypeError):
        reason = f"Data type not JSON serializable: {reason}"
    elif isinstance(error, ValueError):
        reason = f"Value error during JSON processing: {reason}"

    return SerializationError(operation, reason, data)


def wrap_external_error(error: Exception, context: str, operation: str) -> BudgetMechError:
    """
    Wrap external library errors in budgetmech-specific exceptions.

    Args:
        error: The original error
        context: Context where error occurred
        operation: Operation that was being performed

    Returns:
        Appropriate BudgetMechError subclass
    """
    error_type = type(error).__name__
    message = f"{error_type} in {context} during {operation}: {str(error)}"

    details = {
        "original_error": error_type,
        "context": context,
        "operation": operation,
        "original_message": str(error),
    }

    if "lp" in context.lower() or "simplex" in context.lower():
        return LpError(message, details)
    elif "prior" in context.lower() or "mechanism" in context.lower():
        return MechanismError(message, details)
    else:
        return BudgetMechError(message, details)
