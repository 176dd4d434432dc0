from fractions import Fraction
from math import gcd

import pytest
from hypothesis import given, strategies as st

from abpir.exact import binom, is_integral, parse_rat, rat_decimal, rat_str

rationals = st.fractions(max_denominator=10**6)


def test_binom_small_values():
    assert binom(5, 2) == 10
    assert binom(3, 0) == 1
    assert binom(4, 5) == 0
    assert binom(4, -1) == 0


def test_binom_rejects_negative_n():
    with pytest.raises(ValueError):
        binom(-1, 0)


def test_binom_is_unbounded():
    assert binom(80, 40) > 2**63


def test_reduction_and_ordering_examples():
    assert Fraction(1, 2) + Fraction(1, 3) == Fraction(5, 6)
    assert Fraction(82, 135) > Fraction(34, 56)
    assert rat_str(Fraction(164, 270)) == "82/135"
    assert rat_str(Fraction(6, 3)) == "2"


def test_division_by_zero_raises():
    with pytest.raises(ZeroDivisionError):
        Fraction(1, 2) / Fraction(0)


def test_rat_decimal_is_advisory_text():
    assert rat_decimal(Fraction(82, 135)) == "0.6074"
    assert rat_decimal(Fraction(1), 2) == "1.00"


@given(rationals)
def test_string_round_trip(x):
    assert parse_rat(rat_str(x)) == x


@given(rationals, rationals)
def test_compare_matches_cross_multiplication(a, b):
    lhs, rhs = a.numerator * b.denominator, b.numerator * a.denominator
    assert (a < b) == (lhs < rhs)
    assert (a == b) == (lhs == rhs)


@given(rationals, rationals, rationals)
def test_add_mul_commutative_associative(a, b, c):
    assert a + b == b + a
    assert a * b == b * a
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)


@given(rationals, rationals)
def test_results_stay_canonical(a, b):
    results = [a + b, a - b, a * b]
    if b:
        results.append(a / b)
    for r in results:
        assert r.denominator > 0
        assert gcd(r.numerator, r.denominator) == 1


def test_is_integral():
    assert is_integral(Fraction(4, 2))
    assert not is_integral(Fraction(1, 2))
