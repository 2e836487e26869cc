"""Experiment drivers: activity diagrams, geometric sweeps, plateaus, probes, counterexample."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import analysis, circle, ensembles
from .engine import ActivityEstimate, activity, smoothness_audit
from .model import GRAPHON, ChipConfig, FiniteGraph, Model, StepGraphon, l1_distance
from .rationals import format_fraction, simplest_within, to_fraction

DEFAULT_BUDGET = 100_000
PLATEAU_MAX_DEN = 64
REFERENCE_ITERATIONS = 100_000


def pmap(func, items, threads: int = 1):
    """Ordered map; with threads > 1 the work runs in a process pool but results keep input order."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


@dataclass(frozen=True)
class DiagramSample:
    parameter: object
    estimate: ActivityEstimate
    smoothness_hits: int
    label: str = ""


def _adaptive_activity(model, sigma, budget, budget_cap):
    b = budget
    while True:
        est = activity(model, sigma, max_steps=b)
        if est.is_exact or b >= budget_cap:
            return est
        b = min(budget_cap, 4 * b)


def _audit_count(model, sigma, est: ActivityEstimate, audit_cap: int) -> int:
    if est.is_exact:
        horizon = est.transient + est.period
    else:
        horizon = est.steps_used
    return len(smoothness_audit(model, sigma, min(horizon, audit_cap)))


def _diagram_job(args):
    model, sigma, y, budget, budget_cap, audit_cap = args
    sy = sigma.shifted_by_degree(model, y)
    est = _adaptive_activity(model, sy, budget, budget_cap)
    return DiagramSample(y, est, _audit_count(model, sy, est, audit_cap), format_fraction(y))


def activity_diagram(
    model: Model,
    sigma: ChipConfig,
    y_grid,
    budget: int = DEFAULT_BUDGET,
    budget_cap: int | None = None,
    audit_cap: int = 10_000,
    threads: int = 1,
) -> list:
    """s(y) = a(model, sigma + y deg) on a sorted rational grid."""
    ys = [to_fraction(y) for y in y_grid]
    if any(b <= a for a, b in zip(ys, ys[1:])):
        raise ValueError("y grid must be strictly increasing")
    if any(y < 0 for y in ys):
        raise ValueError("y grid must be nonnegative")
    cap = budget if budget_cap is None else max(budget, budget_cap)
    jobs = [(model, sigma, y, budget, cap, audit_cap) for y in ys]
    return pmap(_diagram_job, jobs, threads)


# geometric sweep ---------------------------------------------------------------


@dataclass(frozen=True)
class MuPoint:
    """A grid value of mu: exact rational, or a multiple t * p / log 2 of the critical value."""

    label: str
    value: float
    exact: Fraction | None = None
    log2_multiple: Fraction | None = None

    @property
    def at_log2(self) -> bool:
        return self.log2_multiple == 1

    def as_rational(self) -> Fraction:
        return self.exact if self.exact is not None else to_fraction(self.value)


def mu_rational(q) -> MuPoint:
    q = to_fraction(q)
    return MuPoint(format_fraction(q), float(q), exact=q)


def mu_log2(t, p) -> MuPoint:
    t = to_fraction(t)
    p = to_fraction(p)
    if t == 0:
        return MuPoint("0", 0.0, exact=Fraction(0))
    label = "p/log2" if t == 1 else f"{format_fraction(t)}*p/log2"
    return MuPoint(label, float(t) * float(p) / math.log(2), log2_multiple=t)


def log2_grid(p, count: int) -> list:
    """count equally spaced points on [0, p/log 2], both ends included."""
    if count < 2:
        raise ValueError("a grid needs at least two points")
    return [mu_log2(Fraction(i, count - 1), p) for i in range(count)]


def reference_rotation(mu: MuPoint, p, iterations: int = REFERENCE_ITERATIONS) -> circle.RotationInterval:
    """Enclosure of rho(f^mu), the limiting activity; mu = 0 carries no chips and gives 0."""
    if mu.value == 0:
        return circle.RotationInterval(0.0, 0.0, iterations, 0.0)
    if mu.at_log2:
        fmap = circle.CircleMap.geometric_at_log2(float(to_fraction(p)))
    else:
        fmap = circle.f_mu(mu.value, float(to_fraction(p)))
    return circle.rotation_number(fmap, iterations, 0.0, check=False)


@dataclass(frozen=True)
class GeometricSample:
    mu: MuPoint
    estimate: ActivityEstimate
    reference: circle.RotationInterval
    connected: bool
    smoothness_hits: int

    @property
    def gap(self) -> float:
        est = self.estimate
        value = est.value if est.is_exact and est.value is not None else est.midpoint
        ref = (self.reference.lower + self.reference.upper) / 2
        return abs(float(value) - ref)


@dataclass(frozen=True)
class GeometricSweep:
    n: int
    p: Fraction
    seed: int
    samples: tuple
    connected: bool
    sup_gap: float | None = field(default=None)


def _graph_connected(g: FiniteGraph) -> bool:
    count, _ = connected_components(csr_matrix(g.multiplicities), directed=False)
    return count == 1


def _geometric_job(args):
    g, sigma, budget, budget_cap, audit_cap = args
    est = _adaptive_activity(g, sigma, budget, budget_cap)
    hits = _audit_count(g, sigma, est, audit_cap) if audit_cap else 0
    return est, hits


def _reference_job(args):
    mu, p, iterations = args
    return reference_rotation(mu, p, iterations)


def geometric_sweep(
    n: int,
    p,
    mu_grid,
    seed: int,
    budget: int = DEFAULT_BUDGET,
    budget_cap: int | None = None,
    reference_iterations: int = REFERENCE_ITERATIONS,
    audit_cap: int = 0,
    threads: int = 1,
) -> GeometricSweep:
    """a(G(n, p), sigma^mu_n) across a coupled mu grid, against the limit curve rho(f^mu)."""
    p = to_fraction(p)
    mus = [m if isinstance(m, MuPoint) else mu_rational(m) for m in mu_grid]
    crit = float(p) / math.log(2)
    for m in mus:
        if m.value < 0 or (m.log2_multiple is None and m.value > crit) or (
            m.log2_multiple is not None and m.log2_multiple > 1
        ):
            raise ValueError(f"mu = {m.label} lies outside [0, p/log 2]")
    if any(b.value <= a.value for a, b in zip(mus, mus[1:])):
        raise ValueError("mu grid must be strictly increasing")
    g = ensembles.er_graph(n, p, seed)
    configs = ensembles.coupled_geometric_grid(n, [m.as_rational() for m in mus], seed)
    cap = budget if budget_cap is None else max(budget, budget_cap)
    results = pmap(_geometric_job, [(g, s, budget, cap, audit_cap) for s in configs], threads)
    refs = pmap(_reference_job, [(m, p, reference_iterations) for m in mus], threads)
    conn = _graph_connected(g)
    samples = tuple(
        GeometricSample(m, est, ref, conn, hits) for m, (est, hits), ref in zip(mus, results, refs)
    )
    gaps = [s.gap for s in samples if s.connected]
    return GeometricSweep(n, p, seed, samples, conn, max(gaps) if gaps else None)


# plateaus -----------------------------------------------------------------------


@dataclass(frozen=True)
class Plateau:
    start: object
    end: object
    value: Fraction
    matched: Fraction | None
    count: int

    @property
    def resolved(self) -> bool:
        return self.matched is not None


def _sample_pair(s):
    if isinstance(s, (DiagramSample, GeometricSample)):
        param = s.parameter if isinstance(s, DiagramSample) else s.mu.value
        return param, s.estimate
    return s


def plateau_detect(samples, tol=Fraction(1, 10**9), max_den: int = PLATEAU_MAX_DEN) -> list:
    """Maximal runs (length >= 2) of consecutive exact samples with equal activity.

    Each level is matched to the lowest-denominator rational within ``tol``;
    levels needing a denominator above ``max_den`` are left unresolved.
    """
    tol = to_fraction(tol)
    pairs = [_sample_pair(s) for s in samples]
    out = []
    run = []

    def flush():
        if len(run) >= 2:
            v = run[0][1]
            out.append(Plateau(run[0][0], run[-1][0], v, simplest_within(v, tol, max_den), len(run)))

    for param, est in pairs:
        if est.is_exact and est.value is not None:
            if run and run[-1][1] == est.value:
                run.append((param, est.value))
                continue
            flush()
            run = [(param, est.value)]
        else:
            flush()
            run = []
    flush()
    return out


# robustness --------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeRow:
    delta: Fraction
    kernel_distance: Fraction
    config_distance: Fraction
    base: ActivityEstimate
    perturbed: ActivityEstimate

    @property
    def deviation(self) -> Fraction:
        """|a - a'| when both are exact, else the largest gap consistent with the intervals."""
        a, b = self.base, self.perturbed
        if a.is_exact and b.is_exact and a.value is not None and b.value is not None:
            return abs(a.value - b.value)
        return max(abs(a.upper - b.lower), abs(b.upper - a.lower))


@dataclass(frozen=True)
class ProbeReport:
    rows: tuple
    smooth: bool
    mindeg: Fraction


def perturb_kernel(w: StepGraphon, delta) -> StepGraphon:
    """(1 - delta) W + delta: kernel stays in [0, 1] and degrees do not drop."""
    delta = to_fraction(delta)
    rows = tuple(tuple((1 - delta) * v + delta for v in row) for row in w.kernel)
    return StepGraphon(w.measures, rows)


def shift_config(sigma: ChipConfig, delta) -> ChipConfig:
    delta = to_fraction(delta)
    return ChipConfig(tuple(max(Fraction(0), v + delta) for v in sigma.values), sigma.context)


def robustness_probe(
    w: StepGraphon,
    sigma: ChipConfig,
    schedule,
    kernel: bool = True,
    config_sign: int = 1,
    budget: int = DEFAULT_BUDGET,
    horizon: int = 1000,
    require_smooth: bool = True,
) -> ProbeReport:
    """Activity deviation under kernel and configuration perturbations of size delta."""
    hits = smoothness_audit(w, sigma, horizon)
    smooth = not hits
    if require_smooth and not smooth:
        raise ValueError(f"(W, sigma) is not smooth over {horizon} steps: first hit {hits[0]}")
    base = activity(w, sigma, budget)
    rows = []
    for delta in schedule:
        delta = to_fraction(delta)
        w2 = perturb_kernel(w, delta) if kernel else w
        s2 = shift_config(sigma, config_sign * delta) if config_sign else sigma
        kd = analysis.cut_distance(w, w2).lower if kernel else Fraction(0)
        cd = l1_distance(sigma, s2, w)
        rows.append(ProbeRow(delta, kd, cd, base, activity(w2, s2, budget)))
    return ProbeReport(tuple(rows), smooth, analysis.mindeg(w))


def sentinel_probe(eps) -> tuple:
    """C_1 with sigma = 1 against sigma = 1 - eps: the non-smooth jump from 1 to 0."""
    w = StepGraphon.constant(1)
    eps = to_fraction(eps)
    a = activity(w, ChipConfig((Fraction(1),), GRAPHON))
    b = activity(w, ChipConfig((1 - eps,), GRAPHON))
    return a, b


# counterexample ---------------------------------------------------------------


def factorial_blocks(limit: int) -> list:
    """Blocks [(2k+1)!, (2k+2)!) for k >= 1 that start below ``limit``."""
    out = []
    k = 1
    while math.factorial(2 * k + 1) < limit:
        out.append((math.factorial(2 * k + 1), math.factorial(2 * k + 2)))
        k += 1
    return out


class CounterexampleSpec:
    """Partition of the integers into Z_1, Z_2, Z_3 on a represented range [lo, hi).

    Z_2 holds every integer <= ``z2_upto`` plus the ``blocks`` [a, b). Each
    remaining maximal gap alternates starting with ``first_in_gap`` (1 or 3).
    Construction rejects partitions violating: m in Z_1 iff m + 1 in Z_3.
    """

    def __init__(self, window: int, start: int = 2, lo: int = -1, hi: int | None = None,
                 blocks=None, z2_upto: int = 1, first_in_gap: int = 1):
        if window < 0:
            raise ValueError("window must be nonnegative")
        self.window = window
        self.start = start
        self._custom_blocks = blocks is not None
        self.lo = min(lo, start)
        self.hi = max(hi if hi is not None else 0, start + window + 1)
        self.z2_upto = z2_upto
        self.first_in_gap = first_in_gap
        if first_in_gap not in (1, 3):
            raise ValueError("first_in_gap must be 1 or 3")
        self.blocks = list(blocks) if blocks is not None else factorial_blocks(self.hi + 1)
        self.types = self._build()
        self._check()

    def _build(self) -> np.ndarray:
        lo, hi = self.lo, self.hi
        t = np.zeros(hi - lo, dtype=np.int8)
        z2 = np.zeros(hi - lo, dtype=bool)
        z2[: max(0, min(hi, self.z2_upto + 1) - lo)] = True
        for a, b in self.blocks:
            a2, b2 = max(a, lo), min(b, hi)
            if a2 < b2:
                z2[a2 - lo:b2 - lo] = True
        t[z2] = 2
        # alternate inside each gap, counting from the gap's true start
        idx = np.flatnonzero(~z2)
        if idx.size:
            breaks = np.flatnonzero(np.diff(idx) != 1) + 1
            starts = np.concatenate(([0], breaks))
            ends = np.concatenate((breaks, [idx.size]))
            other = 4 - self.first_in_gap
            for s, e in zip(starts, ends):
                seg = idx[s:e]
                gap_start = self._gap_start(int(seg[0]) + lo)
                offs = seg + lo - gap_start
                t[seg] = np.where(offs % 2 == 0, self.first_in_gap, other)
        return t

    def _gap_start(self, m: int) -> int:
        best = self.z2_upto + 1
        for a, b in self.blocks:
            if b <= m:
                best = max(best, b)
        return best

    def _check(self):
        t = self.types
        bad = np.flatnonzero((t[:-1] == 1) != (t[1:] == 3))
        if bad.size:
            m = int(bad[0]) + self.lo
            raise ValueError(f"partition violates the Z_1/Z_3 pairing at m = {m}")

    def extended(self, lo: int, hi: int) -> "CounterexampleSpec":
        """Same partition rule represented on a range covering [lo, hi)."""
        return CounterexampleSpec(
            self.window, self.start, min(lo, self.lo), max(hi, self.hi),
            self.blocks if self._custom_blocks else None, self.z2_upto, self.first_in_gap,
        )

    def type_of(self, m: int) -> int:
        if not self.lo <= m < self.hi:
            raise IndexError(f"{m} outside the represented range")
        return int(self.types[m - self.lo])


def set_count_odometer(spec: CounterexampleSpec, m: int, n_max: int) -> np.ndarray:
    """u_n(m) = |(Z_2 u Z_3) n {m, ..., m + n - 1}| for n = 0..n_max."""
    if m < spec.lo or m + n_max > spec.hi:
        raise IndexError("window not represented")
    fires = (spec.types[m - spec.lo:m - spec.lo + n_max] != 1).astype(np.int64)
    return np.concatenate(([0], np.cumsum(fires)))


def type_evolution_odometers(spec: CounterexampleSpec, m_lo: int, m_hi: int, n_max: int) -> np.ndarray:
    """Odometers u_n(m) for m in [m_lo, m_hi], n = 0..n_max, by simulating the dynamics.

    A part holding a lambda_{m-1} + b lambda_{m+1} chips fires min(a, b) times
    (the degree is lambda_{m-1} + lambda_{m+1} and |a - b| <= 1), after which
    a' = a - f_m + f_{m-1} and b' = b - f_m + f_{m+1}. Cells within t of the
    simulated range's edge are unreliable after t steps, so the range is padded.
    """
    lo = m_lo - n_max - 1
    hi = m_hi + n_max + 2
    if lo < spec.lo or hi > spec.hi:
        raise IndexError("simulation range not represented")
    types = spec.types[lo - spec.lo:hi - spec.lo]
    coeff = {1: (1, 0), 2: (1, 1), 3: (2, 1)}
    a = np.array([coeff[int(v)][0] for v in types], dtype=np.int64)
    b = np.array([coeff[int(v)][1] for v in types], dtype=np.int64)
    width = m_hi - m_lo + 1
    off = m_lo - lo
    out = np.zeros((n_max + 1, width), dtype=np.int64)
    u = np.zeros_like(a)
    size = len(a)
    for t in range(1, n_max + 1):
        # after t - 1 steps only cells at distance >= t - 1 from both edges are exact
        ta, tb = a[t - 1:size - t + 1], b[t - 1:size - t + 1]
        if ((ta - tb) > 1).any() or (ta < tb).any():
            raise RuntimeError("configuration left the three-type family")
        f = np.minimum(a, b)
        left = np.concatenate(([0], f[:-1]))
        right = np.concatenate((f[1:], [0]))
        a = a - f + left
        b = b - f + right
        u += f
        out[t] = u[off:off + width]
    return out


@dataclass(frozen=True)
class CounterexampleResult:
    start: int
    odometer: np.ndarray = field(repr=False)
    max_ratio: float
    argmax: int
    min_ratio: float
    argmin: int
    validated_up_to: int
    agree: bool


def counterexample_sequence(spec: CounterexampleSpec, min_from: int = 24, validate_up_to: int = 10_000) -> CounterexampleResult:
    """Odometer of the start part over n <= window, with the ratio extrema.

    The set-count formula is cross-checked against the simulated dynamics for
    n <= validate_up_to.
    """
    m = spec.start
    n_max = spec.window
    u = set_count_odometer(spec, m, n_max)
    check = min(n_max, validate_up_to)
    agree = True
    if check > 0:
        wide = spec.extended(m - check - 1, m + check + 2)
        sim = type_evolution_odometers(wide, m, m, check)[:, 0]
        agree = bool(np.array_equal(sim, u[: check + 1]))
    ns = np.arange(1, n_max + 1)
    ratios = u[1:] / ns if n_max else np.array([])
    if ratios.size:
        i = int(np.argmax(ratios))
        mx, amx = float(ratios[i]), i + 1
    else:
        mx, amx = float("nan"), 0
    tail = ratios[min_from - 1:] if n_max >= min_from else np.array([])
    if tail.size:
        j = int(np.argmin(tail))
        mn, amn = float(tail[j]), j + min_from
    else:
        mn, amn = float("nan"), 0
    return CounterexampleResult(m, u, mx, amx, mn, amn, check, agree)
