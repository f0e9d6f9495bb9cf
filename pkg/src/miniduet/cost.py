"""Exact arithmetic for privacy accounting.

Privacy parameters never touch binary floats: costs and budgets are
`Decimal` values extended with an infinity element, so budget subtraction
and cost comparison are free of rounding drift.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation


def as_decimal(x) -> Decimal:
    """Coerce int/str/Decimal to Decimal; floats are refused."""
    if isinstance(x, Decimal):
        return x
    if isinstance(x, int):
        return Decimal(x)
    if isinstance(x, str):
        try:
            return Decimal(x)
        except InvalidOperation as exc:
            raise ValueError(f"not a decimal literal: {x!r}") from exc
    raise TypeError(f"exact decimal required, got {type(x).__name__}")


def decimal_str(d: Decimal) -> str:
    """Plain positional rendering, never scientific notation.

    Preserves significant digits as written ("1.50" stays "1.50").
    """
    return format(d, "f")


@functools.total_ordering
@dataclass(frozen=True)
class ExtReal:
    """A nonnegative exact decimal, or infinity (value=None)."""

    value: Decimal | None = None

    def __post_init__(self):
        if self.value is not None:
            if not isinstance(self.value, Decimal):
                object.__setattr__(self, "value", as_decimal(self.value))
            if self.value < 0:
                raise ValueError(f"ExtReal must be nonnegative, got {self.value}")

    @classmethod
    def finite(cls, x) -> "ExtReal":
        return cls(as_decimal(x))

    @property
    def is_finite(self) -> bool:
        return self.value is not None

    def __add__(self, other: "ExtReal") -> "ExtReal":
        if self.value is None or other.value is None:
            return INFINITY
        return ExtReal(self.value + other.value)

    def __mul__(self, other: "ExtReal") -> "ExtReal":
        # 0 * inf = 0: a zero-sensitivity path carries no dependence at all.
        if self.value == 0 or other.value == 0:
            return ZERO
        if self.value is None or other.value is None:
            return INFINITY
        return ExtReal(self.value * other.value)

    def __lt__(self, other: "ExtReal") -> bool:
        if self.value is None:
            return False
        if other.value is None:
            return True
        return self.value < other.value

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExtReal):
            return NotImplemented
        if self.value is None or other.value is None:
            return self.value is None and other.value is None
        return self.value == other.value

    def __hash__(self):
        return hash(self.value)

    def __str__(self) -> str:
        return "inf" if self.value is None else decimal_str(self.value)


ZERO = ExtReal(Decimal(0))
ONE = ExtReal(Decimal(1))
INFINITY = ExtReal(None)


@dataclass(frozen=True)
class PrivCost:
    """An (epsilon, delta) privacy cost; addition is sequential composition."""

    eps: ExtReal
    delta: ExtReal

    @classmethod
    def finite(cls, eps, delta) -> "PrivCost":
        return cls(ExtReal.finite(eps), ExtReal.finite(delta))

    @property
    def is_finite(self) -> bool:
        return self.eps.is_finite and self.delta.is_finite

    def __add__(self, other: "PrivCost") -> "PrivCost":
        return PrivCost(self.eps + other.eps, self.delta + other.delta)

    def fits_within(self, other: "PrivCost") -> bool:
        """Componentwise <=; the admission test against a remaining budget."""
        return self.eps <= other.eps and self.delta <= other.delta

    def render(self) -> str:
        return f"<{self.eps}, {self.delta}>"

    def __str__(self) -> str:
        return self.render()


ZERO_COST = PrivCost(ZERO, ZERO)
INFINITE_COST = PrivCost(INFINITY, INFINITY)
