"""Exact rationals extended with a single positive infinity.

All arithmetic in the package goes through :class:`fractions.Fraction`.
Budgets and demands of virtual buyers are unbounded, which is modelled by
the singleton :data:`INF` rather than a large sentinel value.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Union


class _PosInf:
    """Positive infinity for exact arithmetic.

    Absorbs addition with finite values, dominates every comparison and
    refuses products with zero or negative numbers.
    """

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_PosInf, ())

    def __hash__(self):
        return hash("polyclinch.INF")

    def __add__(self, other):
        if other is self or isinstance(other, (int, Fraction)):
            return self
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if other is self:
            raise ArithmeticError("INF - INF is undefined")
        if isinstance(other, (int, Fraction)):
            return self
        return NotImplemented

    def __rsub__(self, other):
        raise ArithmeticError("finite - INF is not representable")

    def __mul__(self, other):
        if other is self:
            return self
        if isinstance(other, (int, Fraction)):
            if other <= 0:
                raise ArithmeticError("INF multiplied by a non-positive value")
            return self
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)) and other > 0:
            return self
        raise ArithmeticError("INF divided by a non-positive or infinite value")

    def __rtruediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return Fraction(0)
        return NotImplemented

    def __eq__(self, other):
        return other is self

    def __ne__(self, other):
        return other is not self

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True


INF = _PosInf()

Rat = Fraction
ExtRat = Union[Fraction, _PosInf]


def is_inf(value) -> bool:
    return value is INF


def to_rat(value) -> ExtRat:
    """Coerce ints, Fractions, INF and strings to an exact value."""
    if value is INF:
        return INF
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return parse_rat(value)
    raise TypeError(f"cannot use {value!r} as an exact rational")


def parse_rat(text: str) -> ExtRat:
    s = text.strip()
    if s.lower() in ("inf", "+inf", "infinity"):
        return INF
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational number: {text!r}") from exc


def format_rat(value: ExtRat) -> str:
    if value is INF:
        return "inf"
    return str(Fraction(value))


def is_multiple(value: Fraction, step: Fraction) -> bool:
    """True if ``value`` is an integer multiple of ``step``."""
    return (Fraction(value) / step).denominator == 1


def rat_gcd(values) -> Fraction:
    """Largest rational ``g`` such that every value is an integer multiple of ``g``."""
    num = 0
    den = 1
    for v in values:
        v = Fraction(v)
        num = gcd(num * v.denominator, v.numerator * den)
        den = den * v.denominator
        g = gcd(num, den)
        if g:
            num //= g
            den //= g
    if num == 0:
        raise ValueError("gcd of an empty or all-zero collection")
    return Fraction(num, den)
