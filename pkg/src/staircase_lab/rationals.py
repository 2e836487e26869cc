"""Helpers for exact rational quantities crossing file and CLI boundaries."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable


def to_fraction(value) -> Fraction:
    """Coerce an int, Fraction, or "num/den"/decimal string to a Fraction.

    JSON numbers are accepted through their decimal text, so ``0.1`` becomes
    1/10 rather than the nearest binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        text = value.strip()
        if not text:
            raise ValueError("empty rational string")
        return Fraction(text)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def format_fraction(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def common_denominator(values: Iterable[Fraction]) -> int:
    d = 1
    for v in values:
        d = math.lcm(d, Fraction(v).denominator)
    return d


def simplest_within(x: Fraction, tol: Fraction, max_den: int | None = None) -> Fraction | None:
    """Lowest-denominator rational in the closed interval [x - tol, x + tol].

    Walks the Stern-Brocot tree. Returns ``None`` when every candidate has a
    denominator larger than ``max_den``.
    """
    x = Fraction(x)
    tol = Fraction(tol)
    lo, hi = x - tol, x + tol
    fl = math.floor(lo)
    if math.ceil(lo) <= hi:
        # an integer lies in the interval; prefer the one nearest x
        c = min(max(round(x), math.ceil(lo)), math.floor(hi))
        return Fraction(c)
    # both ends share the integer part fl; search in (0, 1) after shifting
    lo_s, hi_s = lo - fl, hi - fl
    # mediants between a/b = 0/1 and c/d = 1/1
    a, b, c, d = 0, 1, 1, 1
    while True:
        m_num, m_den = a + c, b + d
        if max_den is not None and m_den > max_den:
            return None
        med = Fraction(m_num, m_den)
        if med < lo_s:
            # move right: replace left bound, stepping in bulk
            k = _steps(a, b, c, d, lo_s, left=True)
            a, b = a + k * c, b + k * d
        elif med > hi_s:
            k = _steps(a, b, c, d, hi_s, left=False)
            c, d = c + k * a, d + k * b
        else:
            return med + fl


def _steps(a: int, b: int, c: int, d: int, bound: Fraction, left: bool) -> int:
    # largest k >= 1 keeping the moved endpoint strictly on the same side of bound
    if left:
        # (a + k c)/(b + k d) < bound  <=>  k (c - bound d) < bound b - a
        num = bound * b - a
        den = c - bound * d
    else:
        # (c + k a)/(d + k b) > bound  <=>  k (bound b - a) < c - bound d
        num = c - bound * d
        den = bound * b - a
    if den <= 0:
        return 1
    k = math.ceil(num / den) - 1
    return max(k, 1)
