"""Scaled number structures.

A structure scaled by ``r`` keeps the element values of the base structure
but redefines multiplication and division::

    a x^r b = a * b / r        a /^r b = r * a / b

so that the element with value ``r`` is the multiplicative identity.  The
element with value ``r * a`` represents the base number ``a``.  Addition and
zero are unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Sequence, Union

from .errors import DomainError, StructureMismatchError

__all__ = [
    "ScaledValue",
    "ScaledStructure",
    "scaled_mul",
    "scaled_div",
    "scaled_apply_analytic",
    "horner",
]


@dataclass(frozen=True)
class ScaledValue:
    """An element of a scaled structure.

    ``value`` is the element's value read in the base structure; the number
    it represents is ``value / scale``.
    """

    value: float
    scale: float = 1.0
    ref: Hashable = "x"

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise DomainError(f"scale must be positive and finite, got {self.scale!r}")

    @property
    def represented(self) -> float:
        return self.value / self.scale

    def _check(self, other: "ScaledValue"):
        if not isinstance(other, ScaledValue):
            raise StructureMismatchError(
                f"cannot combine ScaledValue with {type(other).__name__}")
        if other.scale != self.scale or other.ref != self.ref:
            raise StructureMismatchError(
                f"structure mismatch: (r={self.scale}, ref={self.ref!r}) vs "
                f"(r={other.scale}, ref={other.ref!r})")

    def _new(self, value: float) -> "ScaledValue":
        return ScaledValue(value, self.scale, self.ref)

    def __add__(self, other):
        self._check(other)
        return self._new(self.value + other.value)

    def __sub__(self, other):
        self._check(other)
        return self._new(self.value - other.value)

    def __neg__(self):
        return self._new(-self.value)

    def __mul__(self, other):
        return scaled_mul(self, other)

    def __truediv__(self, other):
        return scaled_div(self, other)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise DomainError("only non-negative integer powers are defined")
        out = self._new(self.scale)
        for _ in range(k):
            out = scaled_mul(out, self)
        return out


@dataclass(frozen=True)
class ScaledStructure:
    """The structure ``C^r`` at reference ``base_ref``."""

    scale: float
    base_ref: Hashable = "x"

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise DomainError(f"scale must be positive and finite, got {self.scale!r}")

    @property
    def one(self) -> ScaledValue:
        return ScaledValue(self.scale, self.scale, self.base_ref)

    @property
    def zero(self) -> ScaledValue:
        return ScaledValue(0.0, self.scale, self.base_ref)

    def element(self, number: float) -> ScaledValue:
        """The element representing ``number``."""
        return ScaledValue(self.scale * number, self.scale, self.base_ref)


def scaled_mul(a: ScaledValue, b: ScaledValue) -> ScaledValue:
    a._check(b)
    return a._new(a.value * b.value / a.scale)


def scaled_div(a: ScaledValue, b: ScaledValue) -> ScaledValue:
    a._check(b)
    if b.value == 0:
        raise DomainError("division by the zero element")
    return a._new(a.scale * a.value / b.value)


def horner(coeffs: Sequence[float], x: float) -> float:
    """Evaluate ``sum(c_k x**k)`` with coefficients in ascending order."""
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


Analytic = Union[Callable[[float], float], Sequence[float]]


def scaled_apply_analytic(f: Analytic, a: ScaledValue) -> ScaledValue:
    """Apply the scaled version of ``f`` to ``a``: ``f^r(a^r) = r f(a)``.

    ``f`` is either a callable or a sequence of power-series coefficients in
    ascending order (evaluated with Horner's rule on the represented value).
    """
    x = a.represented
    try:
        y = horner(f, x) if not callable(f) else f(x)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise DomainError(f"function undefined at {x!r}: {exc}") from exc
    if not math.isfinite(y):
        raise DomainError(f"function undefined at {x!r}")
    return a._new(a.scale * y)
