"""Seeded Erdos-Renyi graphs, coupled geometric chip configurations, and their statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from . import rng
from .model import GRAPH, GRAPHON, ChipConfig, FiniteGraph, ModelError
from .rationals import format_fraction, to_fraction

ROW_CHUNK = 1 << 20


@dataclass(frozen=True)
class SeededEnsemble:
    seed: int
    n: int
    p: Fraction
    mu: object = None

    def manifest(self) -> dict:
        d = asdict(self)
        d["p"] = format_fraction(self.p)
        if isinstance(self.mu, Fraction):
            d["mu"] = format_fraction(self.mu)
        return d


def pair_index(u: int, v: int, n: int) -> int:
    """Position of the pair u < v in row-major order over the upper triangle."""
    if not 0 <= u < v < n:
        raise ValueError("need 0 <= u < v < n")
    return u * n - u * (u + 1) // 2 + (v - u - 1)


def _edge_rows(n: int, p, seed: int):
    """Yield (u, boolean row over v > u) for the upper triangle."""
    thresh = np.uint64(rng.below_threshold(to_fraction(p)))
    u = 0
    start = 0
    while u < n - 1:
        # gather consecutive rows into one draw of at most ROW_CHUNK words
        rows = []
        length = 0
        w = u
        while w < n - 1 and (not rows or length + (n - 1 - w) <= ROW_CHUNK):
            rows.append(w)
            length += n - 1 - w
            w += 1
        k = rng.uniform_ints(seed, rng.EDGE_STREAM, start, length)
        present = k < thresh
        pos = 0
        for r in rows:
            span = n - 1 - r
            yield r, present[pos:pos + span]
            pos += span
        start += length
        u = w


def er_graph(n: int, p, seed: int) -> FiniteGraph:
    """G(n, p): pair u < v is an edge iff its uniform in the edge stream is below p."""
    if n < 1:
        raise ValueError("n must be positive")
    p = to_fraction(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    adj = np.zeros((n, n), dtype=np.uint8)
    for u, row in _edge_rows(n, p, seed):
        adj[u, u + 1:] = row
    adj |= adj.T
    return FiniteGraph(n, adj)


def er_degrees(n: int, p, seed: int) -> np.ndarray:
    """Degree sequence of er_graph(n, p, seed) without materialising the matrix."""
    deg = np.zeros(n, dtype=np.int64)
    for u, row in _edge_rows(n, to_fraction(p), seed):
        deg[u] += int(row.sum())
        deg[u + 1:] += row
    return deg


def _thresholds(n: int, mus) -> list:
    # U < 1/(1 + mu n)  <=>  k < T
    out = []
    for mu in mus:
        mu = to_fraction(mu)
        if mu < 0:
            raise ValueError("mu must be nonnegative")
        out.append(rng.below_threshold(Fraction(1) / (1 + mu * n)))
    return out


def _vertex_draws(seed: int, v: int, t_min: int, hint: float) -> np.ndarray:
    """v's draws up to and including the first one below t_min."""
    chunk = max(64, int(2 * hint) + 16)
    start = 0
    pieces = []
    while True:
        k = rng.uniform_ints(seed, v, start, chunk)
        hit = np.flatnonzero(k < t_min)
        if hit.size:
            pieces.append(k[: hit[0] + 1])
            break
        pieces.append(k)
        start += chunk
        chunk *= 2
    return pieces[0] if len(pieces) == 1 else np.concatenate(pieces)


def coupled_geometric_grid(n: int, mus, seed: int) -> list:
    """Chip counts for every mu in ``mus`` from a single pass over each vertex stream.

    chips(v, mu) is the length of the initial run of uniforms >= 1/(1 + mu n),
    so the configurations are pointwise nondecreasing in mu by construction.
    """
    mus = list(mus)
    if not mus:
        return []
    th = _thresholds(n, mus)
    t_min = min(th)
    if t_min == 0:
        raise ValueError("infinite mu is not allowed")
    hint = n * max(float(to_fraction(m)) for m in mus)
    counts = np.zeros((len(mus), n), dtype=np.int64)
    neg_t = -np.array(th, dtype=np.float64)
    for v in range(n):
        draws = _vertex_draws(seed, v, t_min, hint)
        if len(mus) == 1:
            counts[0, v] = len(draws) - 1
            continue
        # first index with a draw below T; the running minimum is nonincreasing so its negation is sorted
        rec = np.minimum.accumulate(draws)
        counts[:, v] = np.searchsorted(-rec.astype(np.float64), neg_t, side="right")
    return [ChipConfig(tuple(int(c) for c in row), GRAPH) for row in counts]


def coupled_geometric_config(n: int, mu, seed: int) -> ChipConfig:
    return coupled_geometric_grid(n, [mu], seed)[0]


def sorted_step_config(sigma: ChipConfig) -> ChipConfig:
    """Sort a graph configuration ascending and scale by 1/n onto n equal parts."""
    if sigma.context != GRAPH:
        raise ModelError("sorted_step_config expects a graph configuration")
    n = len(sigma)
    return ChipConfig(tuple(v / n for v in sorted(sigma.values)), GRAPHON)


@dataclass(frozen=True)
class L1Distance:
    value: float
    error_bound: float

    def __float__(self):
        return self.value


def l1_to_geometric_limit(sigma: ChipConfig, mu) -> L1Distance:
    """||F_n - E||_1 with F_n the scaled empirical CDF of the chips and E(t) = 1 - exp(-t/mu)."""
    mu = float(mu)
    if mu <= 0:
        raise ValueError("mu must be positive")
    n = len(sigma)
    x = np.sort(np.array([float(v) for v in sigma.values])) / n
    jumps, counts = np.unique(x, return_counts=True)
    level = np.cumsum(counts) / n
    # intervals [a, b) with constant level c; the first is [0, jumps[0]) at level 0
    a = np.concatenate(([0.0], jumps[:-1]))
    b = jumps
    c = np.concatenate(([0.0], level[:-1]))
    keep = b > a
    a, b, c = a[keep], b[keep], c[keep]

    def G(t, lev):
        # antiderivative of lev - E(t)
        return (lev - 1.0) * t - mu * np.exp(-t / mu)

    with np.errstate(divide="ignore"):
        tstar = np.where(c < 1.0, -mu * np.log1p(-c), np.inf)
    inside = (tstar > a) & (tstar < b)
    ga, gb = G(a, c), G(b, c)
    gs = G(np.where(inside, tstar, a), c)
    pieces = np.where(inside, np.abs(gs - ga) + np.abs(gb - gs), np.abs(gb - ga))
    tail = mu * math.exp(-jumps[-1] / mu)
    value = float(pieces.sum() + tail)
    eps = np.finfo(float).eps
    scale = float((np.abs(ga) + np.abs(gb) + 2 * np.abs(gs)).sum()) + tail
    err = 4 * eps * (scale + len(pieces) * value)
    return L1Distance(value, float(err))


@dataclass(frozen=True)
class ConcentrationReport:
    n: int
    p: Fraction
    eta: float
    trials: int
    violations: int
    frequency: float
    standard_error: float
    bound: float

    @property
    def passes(self) -> bool:
        return self.frequency <= self.bound + 3 * self.standard_error


def degree_concentration(n: int, p, eta, trials: int, seed: int) -> ConcentrationReport:
    """Frequency of |deg(v_0) - np| > eta n over independent G(n, p) samples."""
    eta = float(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")
    if trials < 1:
        raise ValueError("trials must be positive")
    p = to_fraction(p)
    thresh = np.uint64(rng.below_threshold(p))
    viol = 0
    for t in range(trials):
        s = rng.derive_seed(seed, t)
        # vertex 0's pairs are the first n - 1 words of the edge stream
        deg = int((rng.uniform_ints(s, rng.EDGE_STREAM, 0, n - 1) < thresh).sum())
        if abs(deg - n * p) > eta * n:
            viol += 1
    freq = viol / trials
    se = math.sqrt(freq * (1 - freq) / trials)
    bound = 2 * math.exp(-n * eta * eta / 2)
    return ConcentrationReport(n, p, eta, trials, viol, freq, se, bound)


def trial_graph(n: int, p, seed: int, trial: int) -> FiniteGraph:
    return er_graph(n, p, rng.derive_seed(seed, trial))


def geometric_pmf(k, mu_n: float):
    k = np.asarray(k)
    q = mu_n / (1 + mu_n)
    return (1 - q) * q ** k


def geometric_chisquare(samples, mu_n: float, min_expected: float = 5.0):
    """Chi-square goodness of fit of nonnegative integer samples to Geometric(1/(1 + mu n))."""
    samples = np.asarray(samples)
    total = len(samples)
    kmax = int(samples.max())
    probs = geometric_pmf(np.arange(kmax + 1), mu_n)
    # bin consecutive values until each bin expects at least min_expected; last bin is the tail
    edges = [0]
    acc = 0.0
    for k in range(kmax + 1):
        acc += probs[k] * total
        if acc >= min_expected:
            edges.append(k + 1)
            acc = 0.0
    if edges[-1] == 0:
        edges.append(kmax + 1)
    obs, expct = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        obs.append(int(((samples >= lo) & (samples < hi)).sum()))
        expct.append(float(probs[lo:hi].sum() * total))
    # fold everything beyond the last edge, including the unobserved tail, into the final bin
    obs[-1] += int((samples >= edges[-1]).sum())
    expct[-1] += total - sum(expct)
    return stats.chisquare(obs, expct)
