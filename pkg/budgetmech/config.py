"""
Solver configuration for budgetmech package.

This module holds tolerances and size caps shared by the LP solver, the
rounding procedures, exhaustive search, and the mechanism LP.
"""

from contextlib import contextmanager
from dataclasses import dataclass, fields, replace
from typing import Any, Iterator

from .exceptions import ConfigurationError
from .numeric import ArithmeticMode


@dataclass
class SolverConfig:
    """Numerical tolerances and size limits for budgetmech operations."""

    # Tolerances (FLOAT mode; EXACT mode compares exactly)
    float_tolerance: float = 1e-9
    zero_fraction_threshold: float = 1e-12
    probability_tolerance: float = 1e-12

    # Simplex limits
    exact_lp_max_cells: int = 4_000_000
    max_pivots: int = 200_000
    bland_after_degenerate: int = 25

    # Enumeration limits
    exhaustive_limit: int = 10**7
    mechanism_max_variables: int = 10**6

    default_mode: ArithmeticMode = ArithmeticMode.FLOAT

    def __post_init__(self) -> None:
        for name in ("float_tolerance", "zero_fraction_threshold", "probability_tolerance"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        for name in (
            "exact_lp_max_cells",
            "max_pivots",
            "exhaustive_limit",
            "mechanism_max_variables",
        ):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.bland_after_degenerate < 0:
            raise ConfigurationError("bland_after_degenerate must be non-negative")
        if not isinstance(self.default_mode, ArithmeticMode):
            self.default_mode = ArithmeticMode(self.default_mode)


# Global solver configuration
_solver_config = SolverConfig()


def get_solver_config() -> SolverConfig:
    """Get the current solver configuration."""
    return _solver_config


def set_solver_config(config: SolverConfig) -> None:
    """Set the solver configuration."""
    global _solver_config
    _solver_config = config


def configure_solver(**overrides: Any) -> SolverConfig:
    """
    Update solver settings in place.

    Args:
        **overrides: Field names of SolverConfig with new values

    Returns:
        The updated configuration

    Raises:
        ConfigurationError: On unknown field names or invalid values

    Examples:
        >>> configure_solver(exhaustive_limit=10**5)
        >>> configure_solver(default_mode="exact")
    """
    allowed = [f.name for f in fields(SolverConfig)]
    unknown = sorted(set(overrides) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown settings {unknown}", allowed)

    updated = replace(_solver_config, **overrides)
    set_solver_config(updated)
    return updated


@contextmanager
def solver_config(**overrides: Any) -> Iterator[SolverConfig]:
    """
    Temporarily override solver settings.

    Examples:
        >>> with solver_config(exhaustive_limit=100):
        ...     solve_exact(instance)
    """
    previous = get_solver_config()
    try:
        yield configure_solver(**overrides)
    finally:
        set_solver_config(previous)
