"""
Arithmetic modes shared by every solver.

FLOAT runs on Python floats with an absolute tolerance; EXACT runs on
``fractions.Fraction`` and compares without tolerance.
"""

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from numbers import Rational
from typing import Any, Iterable, Union

Number = Union[float, Fraction, int]


class ArithmeticMode(Enum):
    """Number representation used by a solver run."""

    FLOAT = "float"
    EXACT = "exact"


def to_fraction(value: Any) -> Fraction:
    """
    Convert a number (or a rational string such as ``"1/3"``) to a Fraction.

    Floats go through their shortest repr so ``0.1`` becomes ``1/10`` rather
    than the nearest binary fraction.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot represent {value} exactly")
        return Fraction(repr(float(value)))
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(value)


def to_float(value: Any) -> float:
    """Convert a number or rational string to float."""
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


@dataclass(frozen=True)
class Arithmetic:
    """Comparison and conversion helpers for one arithmetic mode."""

    mode: ArithmeticMode
    tolerance: float = 1e-9

    @property
    def exact(self) -> bool:
        return self.mode is ArithmeticMode.EXACT

    @property
    def tol(self) -> Number:
        return 0 if self.exact else self.tolerance

    def convert(self, value: Any) -> Number:
        return to_fraction(value) if self.exact else to_float(value)

    def convert_all(self, values: Iterable[Any]) -> tuple:
        return tuple(self.convert(v) for v in values)

    def zero(self) -> Number:
        return Fraction(0) if self.exact else 0.0

    def le(self, a: Number, b: Number) -> bool:
        return a <= b + self.tol

    def ge(self, a: Number, b: Number) -> bool:
        return a + self.tol >= b

    def lt(self, a: Number, b: Number) -> bool:
        return a < b - self.tol

    def gt(self, a: Number, b: Number) -> bool:
        return a > b + self.tol

    def eq(self, a: Number, b: Number) -> bool:
        return abs(a - b) <= self.tol

    def is_zero(self, a: Number) -> bool:
        return abs(a) <= self.tol

    def is_positive(self, a: Number) -> bool:
        return a > self.tol

    def clip01(self, a: Number) -> Number:
        """Snap values within tolerance of [0, 1] onto the interval."""
        if a < 0:
            return self.zero()
        if a > 1:
            return Fraction(1) if self.exact else 1.0
        return a


def arithmetic(mode: Union[ArithmeticMode, str, None] = None) -> Arithmetic:
    """Build the Arithmetic helper for ``mode`` using the configured tolerance."""
    from .config import get_solver_config

    config = get_solver_config()
    if mode is None:
        mode = config.default_mode
    return Arithmetic(ArithmeticMode(mode), config.float_tolerance)
