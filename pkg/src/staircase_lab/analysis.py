"""Structure of step graphons: connectivity, neighbourhoods, cut distance, mixing."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .model import ModelError, StepGraphon
from .rationals import common_denominator, to_fraction

EXACT_CUT_PARTS = 20
EXACT_MIXING_STEPS = 64


def mindeg(w: StepGraphon) -> Fraction:
    return min(w.degrees())


def _support(w: StepGraphon) -> np.ndarray:
    return np.array([[v > 0 for v in row] for row in w.kernel], dtype=bool)


def is_connected(w: StepGraphon) -> bool:
    # a single part is an interval that splits into two halves unless W > 0 on it
    s = _support(w)
    if w.k == 1:
        return bool(s[0, 0])
    count, _ = connected_components(csr_matrix(s), directed=False)
    return count == 1


@dataclass(frozen=True)
class Bipartition:
    bipartite: bool
    sides: tuple | None

    def __bool__(self):
        return self.bipartite


def is_bipartite(w: StepGraphon) -> Bipartition:
    """2-colour the support graph; sides are part-index tuples, part 0's side first."""
    s = _support(w)
    if s.diagonal().any():
        return Bipartition(False, None)
    colour = [-1] * w.k
    for root in range(w.k):
        if colour[root] != -1:
            continue
        colour[root] = 0
        stack = [root]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(s[i]).tolist():
                if colour[j] == -1:
                    colour[j] = 1 - colour[i]
                    stack.append(j)
                elif colour[j] == colour[i]:
                    return Bipartition(False, None)
    x = tuple(i for i in range(w.k) if colour[i] == 0)
    y = tuple(i for i in range(w.k) if colour[i] == 1)
    return Bipartition(True, (x, y))


def gamma_eps(w: StepGraphon, parts, eps) -> frozenset:
    """Parts j receiving at least eps from the union of ``parts``: sum_{i in A} m_i W_ij >= eps."""
    eps = to_fraction(eps)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    a = sorted(set(parts))
    for i in a:
        if not 0 <= i < w.k:
            raise IndexError(f"part {i} out of range")
    out = []
    for j in range(w.k):
        mass = sum((w.measures[i] * w.kernel[i][j] for i in a), Fraction(0))
        if mass >= eps:
            out.append(j)
    return frozenset(out)


@dataclass(frozen=True)
class DiameterWitness:
    N: int
    epsilon: Fraction


def support_diameter(w: StepGraphon) -> int:
    dist = shortest_path(csr_matrix(_support(w).astype(np.int8)), unweighted=True, directed=False)
    if np.isinf(dist).any():
        return -1
    return int(dist.max())


def finite_diameter_witness(w: StepGraphon) -> DiameterWitness | None:
    if not is_connected(w) or mindeg(w) <= 0:
        return None
    n = max(1, support_diameter(w))
    eps = min(
        w.measures[i] * w.kernel[i][j]
        for i in range(w.k)
        for j in range(w.k)
        if w.kernel[i][j] > 0
    )
    return DiameterWitness(n, eps)


def verify_witness(w: StepGraphon, witness: DiameterWitness, samples: int = 4096, seed: int = 0) -> bool:
    """Check every nonempty union of parts reaches full measure in N rounds of Gamma_eps.

    Enumerates all 2^k - 1 unions when k <= 20, otherwise a seeded sample of them.
    """
    k = w.k
    scale = common_denominator(
        [w.measures[i] * w.kernel[i][j] for i in range(k) for j in range(k)] + [witness.epsilon]
    )
    coup = np.array(
        [[int(w.measures[i] * w.kernel[i][j] * scale) for j in range(k)] for i in range(k)], dtype=object
    )
    if max(int(v) for v in coup.ravel()) * k < (1 << 62):
        coup = coup.astype(np.int64)
    thresh = int(witness.epsilon * scale)
    if k <= EXACT_CUT_PARTS:
        masks = np.arange(1, 1 << k, dtype=np.int64)
    else:
        rng = np.random.default_rng(seed)
        masks = None
    bits = 1 << np.arange(k, dtype=np.int64)
    chunk = 1 << 14
    if masks is None:
        rng_sets = rng.random((samples, k)) < 0.5
        rng_sets[~rng_sets.any(axis=1), 0] = True
        return _reach_all(rng_sets, coup, thresh, witness.N)
    for start in range(0, len(masks), chunk):
        sets = (masks[start:start + chunk, None] & bits) != 0
        if not _reach_all(sets, coup, thresh, witness.N):
            return False
    return True


def _reach_all(sets: np.ndarray, coup: np.ndarray, thresh: int, n: int) -> bool:
    cur = sets
    covered = sets.copy()
    for _ in range(n):
        cur = (cur.astype(coup.dtype) @ coup) >= thresh
        covered |= cur
    return bool(covered.all())


@dataclass(frozen=True)
class CutDistanceResult:
    lower: Fraction
    upper: Fraction
    exact: bool
    witness_S: tuple
    witness_T: tuple
    breakpoints: tuple = ()


def common_refinement(u: StepGraphon, w: StepGraphon):
    """Overlay two interval partitions; returns (measures, index into u, index into w, breakpoints)."""
    cu = np.cumsum([Fraction(0)] + list(u.measures)).tolist()
    cw = np.cumsum([Fraction(0)] + list(w.measures)).tolist()
    pts = sorted(set(cu) | set(cw))
    meas, iu, iw = [], [], []
    a = b = 0
    for lo, hi in zip(pts[:-1], pts[1:]):
        while cu[a + 1] <= lo:
            a += 1
        while cw[b + 1] <= lo:
            b += 1
        meas.append(hi - lo)
        iu.append(a)
        iw.append(b)
    return meas, iu, iw, tuple(pts)


def _intervals(indices, pts) -> tuple:
    out = []
    for i in sorted(indices):
        lo, hi = pts[i], pts[i + 1]
        if out and out[-1][1] == lo:
            out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return tuple(out)


def cut_distance(
    u: StepGraphon,
    w: StepGraphon,
    method: str = "auto",
    restarts: int = 32,
    seed: int = 0,
) -> CutDistanceResult:
    """Labeled cut distance sup_{S,T} |int_{S x T} (U - W)|, restricted to unions of refined parts.

    Because the objective is bilinear in the part indicators, the supremum over
    measurable sets is attained at unions of parts of the common refinement.
    """
    if method not in ("auto", "exact", "heuristic"):
        raise ValueError(f"unknown method {method!r}")
    meas, iu, iw, pts = common_refinement(u, w)
    k = len(meas)
    mat = [
        [meas[i] * meas[j] * (u.kernel[iu[i]][iu[j]] - w.kernel[iw[i]][iw[j]]) for j in range(k)]
        for i in range(k)
    ]
    upper = sum((abs(v) for row in mat for v in row), Fraction(0))
    degdiff = [sum(row, Fraction(0)) for row in mat]
    half_l1 = sum((abs(v) for v in degdiff), Fraction(0)) / 2
    exact = method == "exact" or (method == "auto" and k <= EXACT_CUT_PARTS)
    if exact:
        if k > 24:
            raise ValueError("exact cut distance is limited to 24 refined parts")
        value, s_set, t_set = _cut_exact(mat)
        lower = upper = value
    else:
        value, s_set, t_set = _cut_heuristic(mat, degdiff, restarts, seed)
        lower = value
    if lower < half_l1:
        raise RuntimeError("cut-distance lower bound fell below half the degree L1 distance")
    return CutDistanceResult(lower, upper, exact, _intervals(s_set, pts), _intervals(t_set, pts), pts)


def _box_value(mat, s_set, t_set) -> Fraction:
    return abs(sum((mat[i][j] for i in s_set for j in t_set), Fraction(0)))


def _integer_matrix(mat):
    k = len(mat)
    scale = common_denominator(v for row in mat for v in row)
    ints = [[int(v * scale) for v in row] for row in mat]
    big = max((abs(v) for row in ints for v in row), default=0) * k * k
    dtype = np.int64 if big < (1 << 62) else object
    return np.array(ints, dtype=dtype).reshape(k, k), scale


def _cut_exact(mat):
    k = len(mat)
    M, scale = _integer_matrix(mat)
    lo_bits = min(k, 12)
    hi_bits = k - lo_bits
    # row sums of every subset of the low / high parts
    lo_rows = M[:lo_bits]
    hi_rows = M[lo_bits:]
    g_lo = _subset_sums(lo_rows)
    g_hi = _subset_sums(hi_rows)
    best = -1
    best_key = None
    for h in range(1 << hi_bits):
        g = g_lo + g_hi[h]
        pos = np.where(g > 0, g, 0).sum(axis=1)
        neg = -np.where(g < 0, g, 0).sum(axis=1)
        score = np.maximum(pos, neg)
        idx = int(np.argmax(score))
        if score[idx] > best:
            best = score[idx]
            best_key = (idx, h, bool(pos[idx] >= neg[idx]))
    idx, h, positive = best_key
    s_set = [i for i in range(lo_bits) if idx >> i & 1] + [lo_bits + i for i in range(hi_bits) if h >> i & 1]
    g = [sum(int(M[i, j]) for i in s_set) for j in range(k)]
    t_set = [j for j in range(k) if (g[j] > 0 if positive else g[j] < 0)]
    value = Fraction(int(best), scale)
    return value, s_set, t_set


def _subset_sums(rows: np.ndarray) -> np.ndarray:
    r, k = rows.shape
    out = np.zeros((1 << r, k), dtype=rows.dtype)
    for i in range(r):
        span = 1 << i
        out[span:2 * span] = out[:span] + rows[i]
    return out


def _cut_heuristic(mat, degdiff, restarts, seed):
    k = len(mat)
    M = np.array([[float(v) for v in row] for row in mat])
    rng = np.random.default_rng(seed)
    starts = [np.array([d > 0 for d in degdiff]), np.array([d < 0 for d in degdiff]), np.ones(k, bool)]
    while len(starts) < restarts:
        starts.append(rng.random(k) < 0.5)
    best_val = Fraction(-1)
    best = None
    for s0 in starts:
        for sign in (1.0, -1.0):
            s = s0.copy()
            prev = None
            for _ in range(4 * k + 10):
                t = (sign * (M.T @ s.astype(float))) > 0
                s = (sign * (M @ t.astype(float))) > 0
                key = (s.tobytes(), t.tobytes())
                if key == prev:
                    break
                prev = key
            s_set = np.flatnonzero(s).tolist()
            t_set = np.flatnonzero(t).tolist()
            val = _box_value(mat, s_set, t_set)
            if val > best_val:
                best_val, best = val, (s_set, t_set)
    # the degree witness (S = parts with positive or negative degree gap, T = all) is always a candidate
    everything = list(range(k))
    for s_set in ([i for i, d in enumerate(degdiff) if d > 0], [i for i, d in enumerate(degdiff) if d < 0]):
        val = _box_value(mat, s_set, everything)
        if val > best_val:
            best_val, best = val, (s_set, everything)
    return best_val, best[0], best[1]


@dataclass(frozen=True)
class MixingReport:
    """Total-variation distances to stationarity for the part-level Markov chain.

    ``rows`` holds ``(n, max_tv)``; for a bipartite carrier it holds
    ``(n, max_tv, tv_X, tv_Y)`` where the side columns use two-step
    transitions restricted to each side.
    """

    stationary: tuple
    bipartite: bool
    sides: tuple | None
    rows: tuple
    exact_steps: int
    error_bound: float


def transition_matrix(w: StepGraphon) -> list:
    degs = w.degrees()
    if any(d == 0 for d in degs):
        raise ModelError("a part of degree zero has no outgoing transitions")
    return [[w.coupling(i, j) / degs[i] for j in range(w.k)] for i in range(w.k)]


def stationary_distribution(w: StepGraphon) -> tuple:
    degs = w.degrees()
    total = sum(m * d for m, d in zip(w.measures, degs))
    return tuple(m * d / total for m, d in zip(w.measures, degs))


def _mat_mul(a, b):
    k = len(a)
    cols = list(zip(*b))
    return [[sum(a[i][t] * cols[j][t] for t in range(k)) for j in range(len(cols))] for i in range(k)]


def _tv_rows(pn, pi, idx):
    return max(sum(abs(pn[i][j] - pi[j]) for j in idx) / 2 for i in idx)


def markov_mixing(w: StepGraphon, n: int) -> MixingReport:
    if n < 1:
        raise ValueError("n must be at least 1")
    if not is_connected(w):
        raise ModelError("mixing analysis needs a connected graphon")
    P = transition_matrix(w)
    pi = stationary_distribution(w)
    k = w.k
    piP = [sum(pi[i] * P[i][j] for i in range(k)) for j in range(k)]
    if tuple(piP) != pi:
        raise RuntimeError("stationary distribution check failed")
    bip = is_bipartite(w)
    full = list(range(k))
    side_data = []
    if bip:
        P2 = _mat_mul(P, P)
        for side in bip.sides:
            mass = sum(pi[i] for i in side)
            pis = {j: pi[j] / mass for j in side}
            side_data.append((side, P2, pis))
    rows = []
    exact_until = min(n, EXACT_MIXING_STEPS)
    pn = P
    side_pow = [P2 for _ in side_data] if bip else []
    for t in range(1, exact_until + 1):
        if t > 1:
            pn = _mat_mul(pn, P)
            side_pow = [_mat_mul(sp, P2) for sp in side_pow] if bip else []
        row = [t, float(_tv_rows(pn, pi, full))]
        for (side, _, pis), sp in zip(side_data, side_pow):
            row.append(float(max(sum(abs(sp[i][j] - pis[j]) for j in side) / 2 for i in side)))
        rows.append(tuple(row))
    err = 0.0
    if n > exact_until:
        Pf = np.array([[float(v) for v in r] for r in P])
        pif = np.array([float(v) for v in pi])
        pnf = np.array([[float(v) for v in r] for r in pn])
        sides_f = []
        for (side, _, pis), sp in zip(side_data, side_pow):
            ix = np.array(side)
            P2f = np.array([[float(v) for v in r] for r in P2])[np.ix_(ix, ix)]
            spf = np.array([[float(v) for v in r] for r in sp])[np.ix_(ix, ix)]
            sides_f.append((P2f, spf, np.array([float(pis[j]) for j in side])))
        unit = np.finfo(float).eps
        for t in range(exact_until + 1, n + 1):
            pnf = pnf @ Pf
            # each product adds at most k roundings per entry relative to row mass 1
            err += (k + 1) * unit
            row = [t, float(0.5 * np.abs(pnf - pif).sum(axis=1).max())]
            new_sides = []
            for P2f, spf, pis_f in sides_f:
                spf = spf @ P2f
                new_sides.append((P2f, spf, pis_f))
                row.append(float(0.5 * np.abs(spf - pis_f).sum(axis=1).max()))
            sides_f = new_sides
            rows.append(tuple(row))
    err *= k
    return MixingReport(pi, bool(bip), bip.sides, tuple(rows), exact_until, err)


def degree_l1(u: StepGraphon, w: StepGraphon) -> Fraction:
    """||deg_U - deg_W||_1 over the common refinement."""
    meas, iu, iw, _ = common_refinement(u, w)
    du, dw = u.degrees(), w.degrees()
    return sum((m * abs(du[a] - dw[b]) for m, a, b in zip(meas, iu, iw)), Fraction(0))
