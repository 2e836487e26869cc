import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from staircase_lab.rationals import common_denominator, format_fraction, simplest_within, to_fraction


def brute_simplest(lo, hi, max_den=200):
    for q in range(1, max_den + 1):
        cands = [Fraction(p, q) for p in range(math.ceil(lo * q), math.floor(hi * q) + 1)]
        if cands:
            return cands
    return []


def test_to_fraction_forms():
    assert to_fraction("3/4") == Fraction(3, 4)
    assert to_fraction("0.1") == Fraction(1, 10)
    assert to_fraction(0.1) == Fraction(1, 10)
    assert to_fraction(7) == 7
    with pytest.raises(TypeError):
        to_fraction(True)
    with pytest.raises(ValueError):
        to_fraction(float("nan"))
    with pytest.raises(ValueError):
        to_fraction("  ")


def test_format_round_trip():
    for q in [Fraction(0), Fraction(5), Fraction(-3, 7), Fraction(22, 7)]:
        assert to_fraction(format_fraction(q)) == q
    assert format_fraction(Fraction(4, 2)) == "2"


def test_common_denominator():
    assert common_denominator([Fraction(1, 4), Fraction(1, 6), 3]) == 12
    assert common_denominator([]) == 1


def test_simplest_within_examples():
    assert simplest_within(Fraction(1, 3) + Fraction(1, 10**12), Fraction(1, 10**9)) == Fraction(1, 3)
    assert simplest_within(Fraction(2, 5), Fraction(0)) == Fraction(2, 5)
    assert simplest_within(Fraction(3, 2), Fraction(1, 2)) in (1, 2)
    assert simplest_within(Fraction(355, 113), Fraction(1, 10**9), max_den=64) is None


@given(st.integers(-50, 50), st.integers(1, 60), st.integers(0, 40), st.integers(1, 400))
@settings(max_examples=300, deadline=None)
def test_simplest_within_matches_brute_force(p, q, t, tden):
    x = Fraction(p, q)
    tol = Fraction(t, tden)
    got = simplest_within(x, tol)
    lo, hi = x - tol, x + tol
    assert lo <= got <= hi
    cands = brute_simplest(lo, hi)
    assert got.denominator == cands[0].denominator
