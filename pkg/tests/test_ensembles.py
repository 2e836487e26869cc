import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate
from scipy.sparse.csgraph import connected_components

from staircase_lab import rng
from staircase_lab.ensembles import (
    SeededEnsemble,
    coupled_geometric_config,
    coupled_geometric_grid,
    degree_concentration,
    er_degrees,
    er_graph,
    geometric_chisquare,
    l1_to_geometric_limit,
    pair_index,
    sorted_step_config,
    trial_graph,
)
from staircase_lab.model import GRAPH, ChipConfig

F = Fraction


def test_draws_are_addressed_not_consumed():
    full = rng.raw_words(9, 4, 0, 23)
    for start in range(0, 20, 3):
        assert np.array_equal(rng.raw_words(9, 4, start, 3), full[start:start + 3])
    direct = np.random.Philox(key=(9 << 64) | 4).random_raw(23)
    assert np.array_equal(full, direct)
    assert not np.array_equal(rng.raw_words(9, 5, 0, 8), full[:8])


def test_threshold_is_exact():
    for p in [F(1, 2), F(1, 3), F(1, 1025), F(2, 3)]:
        t = rng.below_threshold(p)
        assert F(t - 1, 2**53) < p <= F(t, 2**53)
    assert rng.below_threshold(0) == 0 and rng.below_threshold(1) == 2**53


def test_derive_seed_is_stable_and_distinct():
    a = [rng.derive_seed(1, t) for t in range(50)]
    assert a == [rng.derive_seed(1, t) for t in range(50)]
    assert len(set(a)) == 50


def test_pair_index_enumerates_upper_triangle():
    n = 7
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    assert [pair_index(u, v, n) for u, v in pairs] == list(range(len(pairs)))


def test_er_graph_uses_pair_indexed_uniforms():
    n, p, seed = 40, F(1, 3), 12
    g = er_graph(n, p, seed)
    u01 = rng.uniforms(seed, rng.EDGE_STREAM, 0, n * (n - 1) // 2)
    for u in range(n):
        for v in range(u + 1, n):
            assert g.e(u, v) == int(u01[pair_index(u, v, n)] < float(p))
    assert np.array_equal(er_degrees(n, p, seed), g.degrees)


def test_er_extremes_and_determinism():
    assert er_graph(9, 1, 0).edge_count() == 36
    assert er_graph(9, 0, 0).edge_count() == 0
    assert er_graph(50, F(1, 2), 3) == er_graph(50, F(1, 2), 3)
    assert er_graph(50, F(1, 2), 3) != er_graph(50, F(1, 2), 4)


def test_er_mean_degree_large():
    n = 10_000
    deg = er_degrees(n, F(1, 2), seed=1)
    mean = deg.mean()
    np_ = (n - 1) / 2
    assert abs(mean - np_) <= 3 * math.sqrt(np_)


def test_geometric_zero_and_independent_count():
    assert coupled_geometric_config(30, 0, 5).values == (0,) * 30
    n, mu, seed = 25, F(1, 5), 8
    got = coupled_geometric_config(n, mu, seed).values
    thr = 1 / (1 + float(mu) * n)
    for v in range(n):
        u = rng.uniforms(seed, v, 0, 500)
        assert got[v] == int(np.argmax(u < thr))


def test_geometric_coupling_is_monotone():
    gen = np.random.default_rng(0)
    for _ in range(100):
        seed = int(gen.integers(0, 2**32))
        a, b = sorted(gen.integers(0, 40, size=2))
        mus = [F(int(a), 20), F(int(b) + 1, 20)]
        lo, hi = coupled_geometric_grid(30, mus, seed)
        assert all(x <= y for x, y in zip(lo.values, hi.values))
        assert coupled_geometric_config(30, mus[1], seed) == hi


def test_geometric_mean():
    n = 10_000
    s = coupled_geometric_config(n, 1, seed=3)
    mean = float(np.mean([int(v) for v in s.values]))
    assert abs(mean - n) <= 0.05 * n


def test_geometric_marginal_chisquare():
    n = 1000
    samples = np.concatenate([
        np.array([int(v) for v in coupled_geometric_config(n, 1, seed).values]) for seed in range(10)
    ])
    assert len(samples) == 10_000
    assert geometric_chisquare(samples, n).pvalue > 0.01


def test_sorted_step_config():
    s = sorted_step_config(ChipConfig((3, 1, 2)))
    assert s.values == (F(1, 3), F(2, 3), 1)
    assert sorted_step_config(ChipConfig((4, 4))).values == (2, 2)
    assert sorted_step_config(ChipConfig((0, 1, 5))).values == (0, F(1, 3), F(5, 3))


def test_l1_zero_config_is_mu():
    d = l1_to_geometric_limit(ChipConfig((0,) * 10), 2.5)
    assert d.value == pytest.approx(2.5, rel=1e-14)


def test_l1_against_quadrature():
    chips = ChipConfig((0, 3, 3, 7, 12, 30), GRAPH)
    mu = 1.3
    n = len(chips)
    x = np.sort([float(v) / n for v in chips.values])

    def integrand(t):
        return abs(np.searchsorted(x, t, side="right") / n - (1 - math.exp(-t / mu)))

    pts = sorted(set(x.tolist()))
    total = 0.0
    edges = [0.0] + pts
    for a, b in zip(edges, edges[1:]):
        total += integrate.quad(integrand, a, b, limit=200, epsabs=1e-13)[0]
    total += integrate.quad(integrand, edges[-1], np.inf, epsabs=1e-13)[0]
    got = l1_to_geometric_limit(chips, mu)
    assert got.value == pytest.approx(total, abs=1e-9)
    assert got.error_bound < 1e-12


def test_concentration_examples():
    rep = degree_concentration(200, F(1, 2), F(1, 10), 2000, seed=1)
    assert rep.passes and rep.bound == pytest.approx(2 * math.exp(-1))
    assert degree_concentration(50, F(1, 2), 1, 200, seed=2).violations == 0
    assert degree_concentration(50, 1, F(1, 10), 100, seed=2).violations == 0


def test_connectivity_and_mindeg_improve_with_n():
    fracs = []
    for n in (16, 64, 256):
        bad = 0
        trials = 60
        for t in range(trials):
            g = trial_graph(n, F(1, 2), 5, t)
            comps, _ = connected_components(g.multiplicities, directed=False)
            if comps > 1 or g.degrees.min() < 0.3 * n:
                bad += 1
        fracs.append(bad / trials)
    assert fracs[0] >= fracs[1] >= fracs[2]
    assert fracs[2] < fracs[0]


def test_manifest():
    m = SeededEnsemble(7, 512, F(1, 2), F(1, 3)).manifest()
    assert m == {"seed": 7, "n": 512, "p": "1/2", "mu": "1/3"}
