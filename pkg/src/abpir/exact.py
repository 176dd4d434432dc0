"""Exact rational helpers.

All scheme quantities are :class:`fractions.Fraction` values, which are
always stored in lowest terms with a positive denominator.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb

Rational = Fraction

__all__ = ["Rational", "binom", "rat_str", "parse_rat", "rat_decimal", "is_integral"]


def binom(n: int, k: int) -> int:
    """Binomial coefficient C(n, k), zero outside ``0 <= k <= n``."""
    if n < 0:
        raise ValueError(f"binom requires n >= 0, got n={n}")
    if k < 0 or k > n:
        return 0
    return comb(n, k)


def rat_str(x) -> str:
    """Serialize as ``"num/den"``; the denominator is omitted when it is 1."""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_rat(text: str) -> Fraction:
    return Fraction(text.strip())


def rat_decimal(x, places: int = 4) -> str:
    # display only; never fed back into scheme math
    return f"{float(x):.{places}f}"


def is_integral(x) -> bool:
    return Fraction(x).denominator == 1
