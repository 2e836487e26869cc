"""Parallel chip-firing: the update operator, odometers, and activity estimates.

All dynamics run on an integer lattice. With ``D`` the common denominator of
the chips, degrees and couplings, the state ``x = D * sigma`` evolves by

    x' = x - degD * f + C @ f,   f = x // degD  (0 where the degree vanishes)

which is exact, so repeated configurations can be detected by hashing.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .model import (
    GRAPHON,
    ChipConfig,
    FiniteGraph,
    Model,
    ModelError,
    StepGraphon,
    check_carrier,
    context_of,
    degree_vector,
)
from .rationals import common_denominator

DEFAULT_MAX_STEPS = 100_000
DEFAULT_TABLE_CAP = 1 << 18
_INT64_SAFE = 1 << 62


class _Lattice:
    """Integer form of one (model, sigma) system."""

    def __init__(self, model: Model, sigma: ChipConfig):
        check_carrier(model, sigma)
        self.model = model
        self.context = context_of(model)
        if isinstance(model, StepGraphon):
            k = model.k
            degs = model.degrees()
            coup = [[model.coupling(i, j) for j in range(k)] for i in range(k)]
            D = common_denominator(list(sigma.values) + list(degs) + [c for row in coup for c in row])
            weights = model.measures
            deg_int = [int(d * D) for d in degs]
            c_int = [int(c * D) for row in coup for c in row]
            c_max = max(c_int)
        else:
            D = common_denominator(sigma.values)
            weights = (1,) * model.n
            deg_int = [int(d) * D for d in model.degrees.tolist()]
            c_max = int(model.multiplicities.max()) * D
        self.D = D
        x0 = [int(v * D) for v in sigma.values]
        # conserved weighted mass bounds every entry and every partial sum of C @ f
        mass = sum(w * v for w, v in zip(weights, x0))
        bound = 2 * sum(mass / w for w in weights) + max(x0, default=0) + 1
        big = max([bound, c_max] + deg_int)
        self.dtype = np.int64 if big < _INT64_SAFE else object
        size = len(x0)
        self.x0 = np.array(x0, dtype=self.dtype)
        self.degD = np.array(deg_int, dtype=self.dtype)
        if isinstance(model, StepGraphon):
            self.C = np.array(c_int, dtype=self.dtype).reshape(size, size)
        elif self.dtype is object:
            self.C = model.multiplicities.astype(object) * D
        else:
            self.C = model.multiplicities.astype(np.int64) * D
        self.firing = self.degD > 0
        self._safe_deg = np.where(self.firing, self.degD, 1).astype(self.dtype)

    def fire(self, x: np.ndarray) -> np.ndarray:
        f = x // self._safe_deg
        f[~self.firing] = 0
        return f

    def apply(self, x: np.ndarray, f: np.ndarray) -> np.ndarray:
        return x - self.degD * f + self.C @ f

    def advance(self, x: np.ndarray):
        f = self.fire(x)
        return self.apply(x, f), f

    def to_config(self, x: np.ndarray) -> ChipConfig:
        D = self.D
        return ChipConfig(tuple(Fraction(int(v), D) for v in x), self.context)

    def digest(self, x: np.ndarray) -> bytes:
        if self.dtype is object:
            raw = ",".join(map(str, x.tolist())).encode()
        else:
            raw = x.tobytes()
        return hashlib.blake2b(raw, digest_size=16).digest()

    def components(self) -> list:
        support = csr_matrix(self.C != 0)
        count, labels = connected_components(support, directed=False)
        comps = [[] for _ in range(count)]
        for i, lab in enumerate(labels.tolist()):
            comps[lab].append(i)
        comps.sort(key=lambda c: c[0])
        return comps


@dataclass(frozen=True)
class FiringState:
    """Configuration after ``step`` parallel updates together with the odometer."""

    model: Model = field(repr=False)
    config: ChipConfig
    odometer: tuple
    step: int


@dataclass(frozen=True)
class ActivityEstimate:
    """Exact activity with period data, or a certified Fekete interval.

    For the exact kind ``lower == upper == value``; ``bounds`` keeps the
    Fekete interval accumulated up to detection. On a disconnected model the
    per-component rates sit in ``component_values`` and ``value`` is ``None``
    unless they agree.
    """

    kind: str
    value: Fraction | None
    lower: Fraction
    upper: Fraction
    period: int | None
    transient: int | None
    steps_used: int
    component_values: tuple = ()
    components: tuple = ()
    uniform: bool = True
    bounds: tuple | None = None

    @property
    def is_exact(self) -> bool:
        return self.kind == "exact"

    @property
    def midpoint(self) -> Fraction:
        return (self.lower + self.upper) / 2


def firing_vector(model: Model, sigma: ChipConfig) -> tuple:
    lat = _Lattice(model, sigma)
    return tuple(int(v) for v in lat.fire(lat.x0))


def step(model: Model, sigma: ChipConfig) -> ChipConfig:
    lat = _Lattice(model, sigma)
    x, _ = lat.advance(lat.x0)
    return lat.to_config(x)


def trajectory(model: Model, sigma: ChipConfig, n: int) -> Iterator[FiringState]:
    """Yield the states at steps 0..n."""
    if n < 0:
        raise ValueError("number of steps must be nonnegative")
    lat = _Lattice(model, sigma)
    x = lat.x0.copy()
    u = np.zeros_like(x)
    yield FiringState(model, lat.to_config(x), tuple(int(v) for v in u), 0)
    for t in range(1, n + 1):
        x, f = lat.advance(x)
        u = u + f
        yield FiringState(model, lat.to_config(x), tuple(int(v) for v in u), t)


def run(model: Model, sigma: ChipConfig, n: int) -> FiringState:
    if n < 0:
        raise ValueError("number of steps must be nonnegative")
    lat = _Lattice(model, sigma)
    x = lat.x0.copy()
    u = np.zeros_like(x)
    for _ in range(n):
        x, f = lat.advance(x)
        u = u + f
    return FiringState(model, lat.to_config(x), tuple(int(v) for v in u), n)


def extremal_odometers(state: FiringState) -> tuple:
    """(m_n, M_n): every part has positive measure, so these are the plain min and max."""
    u = state.odometer
    return min(u), max(u)


class _Fekete:
    """Running max of m_k/k and min of M_k/k."""

    def __init__(self):
        self.lo_num, self.lo_den = 0, 1
        self.hi_num, self.hi_den = None, 1

    def update(self, k: int, u: np.ndarray):
        m, M = int(u.min()), int(u.max())
        if m * self.lo_den > self.lo_num * k:
            self.lo_num, self.lo_den = m, k
        if self.hi_num is None or M * self.hi_den < self.hi_num * k:
            self.hi_num, self.hi_den = M, k

    def interval(self) -> tuple:
        lo = Fraction(self.lo_num, self.lo_den)
        if self.hi_num is None:
            return lo, None
        return lo, Fraction(self.hi_num, self.hi_den)


def activity(
    model: Model,
    sigma: ChipConfig,
    max_steps: int = DEFAULT_MAX_STEPS,
    table_cap: int = DEFAULT_TABLE_CAP,
) -> ActivityEstimate:
    """Exact activity by cycle detection, or a Fekete interval when the budget runs out."""
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    if table_cap < 1:
        raise ValueError("table_cap must be at least 1")
    lat = _Lattice(model, sigma)
    fek = _Fekete()
    x = lat.x0.copy()
    u = np.zeros_like(x)
    seen = {lat.digest(x): 0}
    found = None
    t = 0
    while t < max_steps:
        x, f = lat.advance(x)
        u = u + f
        t += 1
        fek.update(t, u)
        key = lat.digest(x)
        j = seen.get(key)
        if j is not None and _replay_equals(lat, j, x):
            found = (j, t - j)
            break
        if len(seen) < table_cap:
            seen[key] = t
        else:
            seen = None
            found, t, x, u = _brent(lat, x, u, t, max_steps, fek)
            break
    if found is None:
        lo, hi = fek.interval()
        return ActivityEstimate("interval", None, lo, hi, None, None, t)
    transient, period = found
    # x is now a state on the cycle; count fires over one full period
    fires = np.zeros_like(x)
    y = x
    for _ in range(period):
        y, f = lat.advance(y)
        fires = fires + f
    return _exact_result(lat, fires, period, transient, t, fek)


def _replay_equals(lat: _Lattice, j: int, x: np.ndarray) -> bool:
    y = lat.x0.copy()
    for _ in range(j):
        y, _ = lat.advance(y)
    return bool(np.array_equal(y, x))


def _brent(lat, x, u, t, max_steps, fek):
    power = lam = 1
    tortoise = x
    hare, f = lat.advance(x)
    u = u + f
    t += 1
    fek.update(t, u)
    while not np.array_equal(tortoise, hare):
        if t >= max_steps:
            return None, t, hare, u
        if power == lam:
            tortoise = hare
            power *= 2
            lam = 0
        hare, f = lat.advance(hare)
        u = u + f
        t += 1
        fek.update(t, u)
        lam += 1
    # exact transient: two pointers lam apart walk from the start until they meet
    a = lat.x0.copy()
    b = lat.x0.copy()
    for _ in range(lam):
        b, _ = lat.advance(b)
    mu = 0
    while not np.array_equal(a, b):
        a, _ = lat.advance(a)
        b, _ = lat.advance(b)
        mu += 1
    return (mu, lam), t, a, u


def _exact_result(lat, fires, period, transient, t, fek) -> ActivityEstimate:
    comps = lat.components()
    values = []
    for comp in comps:
        rates = {int(fires[i]) for i in comp}
        if len(rates) != 1:
            raise RuntimeError("fire counts over a period differ inside a connected component")
        values.append(Fraction(rates.pop(), period))
    uniform = len(set(values)) == 1
    lo, hi = fek.interval()
    if uniform:
        v = values[0]
        lower = upper = v
    else:
        v = None
        lower, upper = min(values), max(values)
    return ActivityEstimate(
        "exact",
        v,
        lower,
        upper,
        period,
        transient,
        t,
        tuple(values),
        tuple(tuple(c) for c in comps),
        uniform,
        (lo, hi),
    )


def beta_activity(model: Model, sigma: ChipConfig, n: int) -> Fraction:
    """beta_n / n: average measure of parts holding at least their degree."""
    if context_of(model) != GRAPHON:
        raise ModelError("beta activity is defined for graphon configurations")
    if n < 1:
        raise ValueError("n must be at least 1")
    lat = _Lattice(model, sigma)
    m = model.measures
    x = lat.x0.copy()
    total = Fraction(0)
    for _ in range(n):
        hit = (x >= lat.degD).tolist()
        total += sum((mi for mi, h in zip(m, hit) if h), Fraction(0))
        x, _ = lat.advance(x)
    return total / n


def smoothness_audit(model: Model, sigma: ChipConfig, n: int) -> list:
    """Every (step, index, k) with U^step sigma equal to k * deg at a positive-degree site."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    lat = _Lattice(model, sigma)
    hits = []
    x = lat.x0.copy()
    idx = np.flatnonzero(lat.firing)
    for i in range(n + 1):
        xs = x[idx]
        ds = lat.degD[idx]
        on = np.flatnonzero(xs % ds == 0)
        for pos in on.tolist():
            hits.append((i, int(idx[pos]), int(xs[pos] // ds[pos])))
        if i < n:
            x, _ = lat.advance(x)
    return hits


def reconstruct(model: Model, sigma: ChipConfig, odometer) -> ChipConfig:
    """sigma - deg * u + coupling @ u, the configuration implied by an odometer."""
    check_carrier(model, sigma)
    degs = degree_vector(model)
    size = len(sigma)
    out = []
    for i in range(size):
        if isinstance(model, StepGraphon):
            inflow = sum((model.coupling(i, j) * odometer[j] for j in range(size)), Fraction(0))
        else:
            inflow = Fraction(sum(model.e(i, j) * odometer[j] for j in range(size)))
        out.append(sigma[i] - degs[i] * odometer[i] + inflow)
    return ChipConfig(tuple(out), sigma.context)


def is_graph(model: Model) -> bool:
    return isinstance(model, FiniteGraph)
