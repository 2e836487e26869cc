"""Degree-one circle-map lifts and rotation-number enclosures."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction

from .model import ChipConfig, StepGraphon, check_carrier
from .rationals import common_denominator, to_fraction

MONOTONE_GRID = 1 << 10


class CircleMapError(ValueError):
    pass


class CircleMap:
    """Lift f: R -> R with f(x + 1) = f(x) + 1, described by its values on [0, 1).

    Three kinds exist. ``empirical`` maps are right-continuous step functions
    ``base + sum of weights with threshold <= x`` and evaluate exactly on
    rationals. ``closed_form`` is the geometric-family map and evaluates in
    floating point. ``affine`` is the rigid rotation x + c.
    """

    def __init__(self, kind, *, base=None, jumps=(), mu=None, p=None, c=None, label=""):
        self.kind = kind
        self.label = label
        if kind == "empirical":
            self.base = Fraction(base)
            jumps = sorted((Fraction(t), Fraction(w)) for t, w in jumps if w != 0)
            merged = []
            for t, w in jumps:
                if merged and merged[-1][0] == t:
                    merged[-1] = (t, merged[-1][1] + w)
                else:
                    merged.append((t, w))
            self.jumps = tuple(merged)
            self._thresholds = [t for t, _ in merged]
            cum = [Fraction(0)]
            for _, w in merged:
                cum.append(cum[-1] + w)
            self._cum = cum
            inside = [w for t, w in merged if t < 1]
            if any(w < 0 for w in inside):
                raise CircleMapError("empirical map has a negative jump")
            if sum(inside, Fraction(0)) - sum((w for t, w in merged if t <= 0), Fraction(0)) > 1:
                raise CircleMapError("empirical map rises by more than 1 over a period")
        elif kind == "closed_form":
            if mu is None or mu <= 0:
                raise CircleMapError("mu must be positive")
            self.mu = float(mu)
            self.p = float(p)
            self._a = self.p / self.mu
            self._den = -math.expm1(-self._a)
        elif kind == "affine":
            self.c = to_fraction(c)
        else:
            raise CircleMapError(f"unknown kind {kind!r}")

    @classmethod
    def geometric_at_log2(cls, p) -> "CircleMap":
        """f^mu at mu = p / log 2, built so that exp(-p/mu) is exactly 1/2."""
        m = cls("closed_form", mu=float(p) / math.log(2), p=p, label="f_mu")
        m._a = math.log(2)
        m._den = -math.expm1(-m._a)
        return m

    def _unit(self, r):
        """Value on [0, 1)."""
        if self.kind == "empirical":
            i = bisect.bisect_right(self._thresholds, r)
            return self.base + self._cum[i]
        if self.kind == "closed_form":
            return math.exp(-self._a * (1.0 - float(r))) / self._den
        return r + self.c

    def __call__(self, x):
        if isinstance(x, float) or self.kind == "closed_form":
            x = float(x)
            k = math.floor(x)
            return k + self._unit(x - k)
        x = to_fraction(x)
        k = math.floor(x)
        return k + self._unit(x - k)

    @property
    def discontinuities(self) -> tuple:
        """Points of [0, 1) where the lift jumps, including 0 when f(1-) != f(0) + 1."""
        if self.kind != "empirical":
            return ()
        pts = [t for t, w in self.jumps if 0 < t < 1]
        left_limit = self.base + sum((w for t, w in self.jumps if t < 1), Fraction(0))
        if left_limit != self._unit(Fraction(0)) + 1:
            pts.insert(0, Fraction(0))
        return tuple(pts)

    @property
    def continuous(self) -> bool:
        return not self.discontinuities

    def sample(self, points: int):
        return [(Fraction(i, points), self(Fraction(i, points))) for i in range(points)]

    def check_monotone(self, points: int = MONOTONE_GRID) -> bool:
        xs = [Fraction(i, points) for i in range(points + 1)]
        if self.kind == "closed_form":
            vals = [self(float(x)) for x in xs]
        else:
            vals = [self(x) for x in xs]
        return all(a <= b for a, b in zip(vals, vals[1:]))

    def lattice_denominator(self, x0: Fraction) -> int | None:
        """Denominator L with f((1/L) Z) inside (1/L) Z, for exact orbit iteration."""
        if self.kind == "empirical":
            return common_denominator([self.base, x0] + [w for _, w in self.jumps])
        if self.kind == "affine":
            return common_denominator([self.c, x0])
        return None

    def __repr__(self):
        if self.kind == "empirical":
            return f"CircleMap(empirical, base={self.base}, jumps={len(self.jumps)})"
        if self.kind == "closed_form":
            return f"CircleMap(closed_form, mu={self.mu!r}, p={self.p!r})"
        return f"CircleMap(affine, c={self.c})"


def _step_values(sigma: ChipConfig, measures=None):
    if measures is None:
        measures = (Fraction(1, len(sigma)),) * len(sigma)
    return list(zip(sigma.values, measures))


def _carrier_measures(sigma: ChipConfig, carrier: StepGraphon | None):
    if carrier is None:
        return None
    check_carrier(carrier, sigma)
    if any(v != 1 for row in carrier.kernel for v in row):
        raise CircleMapError("circle maps are built for configurations on C_1")
    return carrier.measures


def build_f_sigma(sigma: ChipConfig, carrier: StepGraphon | None = None) -> CircleMap:
    """f_sigma(x) = lambda{sigma >= 1} + lambda{sigma in [1-x, 1) or [2-x, 2)} on [0, 1).

    ``carrier`` supplies part measures; by default parts are equal.
    """
    pairs = _step_values(sigma, _carrier_measures(sigma, carrier))
    base = Fraction(0)
    jumps = []
    for s, m in pairs:
        if s >= 2:
            raise CircleMapError(f"configuration not preconfined: value {s} >= 2")
        if s >= 1:
            base += m
            jumps.append((2 - s, m))
        else:
            jumps.append((1 - s, m))
    return CircleMap("empirical", base=base, jumps=jumps, label="f_sigma")


def build_phi(sigma: ChipConfig, y, carrier: StepGraphon | None = None) -> CircleMap:
    """Phi_{sigma,y}(x) = ceil(x) - lambda{sigma < ceil(x) - x} + y, which is y + lambda{sigma >= 1 - x} on [0, 1)."""
    y = to_fraction(y)
    pairs = _step_values(sigma, _carrier_measures(sigma, carrier))
    jumps = []
    for s, m in pairs:
        if s >= 1:
            raise CircleMapError(f"configuration not stable on C_1: value {s} >= 1")
        jumps.append((1 - s, m))
    return CircleMap("empirical", base=y, jumps=jumps, label="phi")


def affine(c) -> CircleMap:
    return CircleMap("affine", c=c, label="rotation")


def f_mu(mu, p) -> CircleMap:
    """f^mu(x) = exp(-p(1-x)/mu) / (1 - exp(-p/mu)) on [0, 1)."""
    if mu is None or float(mu) <= 0:
        raise CircleMapError("mu must be positive")
    p = float(p)
    if not 0 < p <= 1:
        raise CircleMapError("p must lie in (0, 1]")
    return CircleMap("closed_form", mu=float(mu), p=p, label="f_mu")


def y_of_mu(mu, p) -> float:
    mu, p = float(mu), float(p)
    if mu <= 0:
        raise ValueError("mu must be positive")
    return p * math.exp(-p / mu) / -math.expm1(-p / mu)


def sigma_bar(mu, p, v) -> float:
    """Increasing rearrangement of U sigma^mu: -mu log(1 - v + v e^{-p/mu}) + y(mu)."""
    mu, p, v = float(mu), float(p), float(v)
    if mu <= 0:
        raise ValueError("mu must be positive")
    if not 0 <= v <= 1:
        raise ValueError("v must lie in [0, 1]")
    # 1 - v(1 - e^{-p/mu}) written with expm1 for accuracy
    return -mu * math.log1p(v * math.expm1(-p / mu)) + y_of_mu(mu, p)


def sigma_mu(mu, v) -> float:
    """The limiting geometric configuration -mu log(1 - v)."""
    mu, v = float(mu), float(v)
    if not 0 <= v < 1:
        raise ValueError("v must lie in [0, 1)")
    return -mu * math.log1p(-v)


def u_sigma_mu(mu, p, v) -> float:
    """One parallel step of sigma^mu on C_p: its p-fractional part plus y(mu)."""
    return math.fmod(sigma_mu(mu, v), float(p)) + y_of_mu(mu, p)


@dataclass(frozen=True)
class RotationInterval:
    lower: object
    upper: object
    n: int
    x0: object

    @property
    def midpoint(self):
        return (self.lower + self.upper) / 2

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, value) -> bool:
        return self.lower <= value <= self.upper


def rotation_number(f: CircleMap, n: int, x0=0, check: bool = True) -> RotationInterval:
    """Enclosure [(f^n(x0) - x0 - 1)/n, (f^n(x0) - x0 + 1)/n] of the rotation number."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if check and not f.check_monotone():
        raise CircleMapError("map is not monotone on the sampling grid")
    if f.kind == "closed_form":
        x0 = float(x0)
        k = math.floor(x0)
        r = x0 - k
        for _ in range(n):
            v = f._unit(r)
            fl = math.floor(v)
            k += fl
            r = v - fl
            if not 0.0 <= r < 1.0:
                raise CircleMapError(f"orbit left the unit interval: {r!r}")
        disp = (k - math.floor(x0)) + (r - (x0 - math.floor(x0)))
        return RotationInterval((disp - 1) / n, (disp + 1) / n, n, x0)
    x0 = to_fraction(x0)
    if f.kind == "affine":
        disp = n * f.c
        return RotationInterval((disp - 1) / n, (disp + 1) / n, n, x0)
    disp = _lattice_orbit(f, x0, n)
    return RotationInterval((disp - 1) / n, (disp + 1) / n, n, x0)


def _lattice_orbit(f: CircleMap, x0: Fraction, n: int) -> Fraction:
    # iterate on integers X = L x; the step function becomes a table of integer cutoffs
    L = f.lattice_denominator(x0)
    cut = [math.ceil(t * L) for t in f._thresholds]
    cum = [int(c * L) for c in f._cum]
    base = int(f.base * L)
    X = int(x0 * L)
    q, r = divmod(X, L)
    start = X
    for _ in range(n):
        v = base + cum[bisect.bisect_right(cut, r)]
        dq, r = divmod(v, L)
        q += dq
    end = q * L + r
    return Fraction(end - start, L)
