import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import graphons, random_graphon
from staircase_lab import ensembles
from staircase_lab.analysis import (
    common_refinement,
    cut_distance,
    degree_l1,
    finite_diameter_witness,
    gamma_eps,
    is_bipartite,
    is_connected,
    markov_mixing,
    mindeg,
    stationary_distribution,
    transition_matrix,
    verify_witness,
)
from staircase_lab.model import ModelError, StepGraphon, from_graph

F = Fraction
HALF = (F(1, 2), F(1, 2))
SWAP = StepGraphon(HALF, ((0, 1), (1, 0)))


def brute_cut(u, w):
    meas, iu, iw, _ = common_refinement(u, w)
    k = len(meas)
    best = F(0)
    for s in itertools.product((0, 1), repeat=k):
        for t in itertools.product((0, 1), repeat=k):
            v = sum(meas[i] * meas[j] * (u.kernel[iu[i]][iu[j]] - w.kernel[iw[i]][iw[j]])
                    for i in range(k) for j in range(k) if s[i] and t[j])
            best = max(best, abs(v))
    return best


def test_mindeg_examples():
    assert mindeg(StepGraphon.constant(F(2, 7))) == F(2, 7)
    assert mindeg(SWAP) == F(1, 2)
    assert mindeg(StepGraphon.constant(0, k=2)) == 0


def test_connectivity_and_bipartiteness():
    cp = StepGraphon.constant(F(1, 3))
    assert is_connected(cp) and not is_bipartite(cp)
    assert is_connected(SWAP)
    b = is_bipartite(SWAP)
    assert b and b.sides == ((0,), (1,))
    block = StepGraphon(HALF, ((1, 0), (0, 1)))
    assert not is_connected(block)
    assert not is_connected(StepGraphon.constant(0))


def test_gamma_eps_examples():
    cp = StepGraphon.constant(F(1, 2), k=3)
    a = {1}
    assert gamma_eps(cp, a, F(1, 2) * F(1, 3)) == frozenset({0, 1, 2})
    assert gamma_eps(cp, {0, 1, 2}, F(3, 2)) == frozenset()
    assert gamma_eps(SWAP, {0}, F(1, 2)) == frozenset({1})


@given(graphons(k_max=5), st.data())
@settings(max_examples=80, deadline=None)
def test_gamma_eps_monotone(w, data):
    a = set(data.draw(st.sets(st.integers(0, w.k - 1), min_size=1)))
    b = a | set(data.draw(st.sets(st.integers(0, w.k - 1))))
    e1 = F(data.draw(st.integers(1, 30)), 60)
    e2 = e1 + F(data.draw(st.integers(0, 30)), 60)
    assert gamma_eps(w, a, e1) <= gamma_eps(w, b, e1)
    assert gamma_eps(w, a, e2) <= gamma_eps(w, a, e1)


def test_diameter_examples():
    cp = StepGraphon.constant(F(1, 2), measures=(F(1, 4), F(3, 4)))
    wit = finite_diameter_witness(cp)
    assert wit.N == 1 and wit.epsilon == F(1, 8)
    assert verify_witness(cp, wit)
    assert finite_diameter_witness(StepGraphon(HALF, ((1, 0), (0, 1)))) is None
    third = (F(1, 3),) * 3
    path = StepGraphon(third, ((0, 1, 0), (1, 0, 1), (0, 1, 0)))
    wit = finite_diameter_witness(path)
    assert wit.N == 2 and verify_witness(path, wit)


def test_cut_distance_examples():
    w = random_graphon(random.Random(3), 4)
    assert cut_distance(w, w).lower == 0
    p, q = StepGraphon.constant(F(1, 3)), StepGraphon.constant(F(3, 4))
    r = cut_distance(p, q)
    assert r.exact and r.lower == F(5, 12)
    assert r.witness_S == ((0, 1),) and r.witness_T == ((0, 1),)


def test_cut_distance_sampled_graph_vs_constant():
    g = ensembles.er_graph(100, F(1, 2), seed=4)
    wg = from_graph(g)
    cp = StepGraphon.constant(F(1, 2))
    r = cut_distance(wg, cp, method="heuristic", restarts=8)
    assert not r.exact
    assert r.lower >= degree_l1(wg, cp) / 2


def test_cut_distance_matches_brute_force():
    rng = random.Random(17)
    for _ in range(25):
        u = random_graphon(rng, 3)
        w = random_graphon(rng, 3)
        if len(common_refinement(u, w)[0]) > 6:
            continue
        r = cut_distance(u, w, method="exact")
        assert r.lower == r.upper == brute_cut(u, w)


def test_heuristic_is_a_lower_bound():
    rng = random.Random(23)
    hits = total = 0
    for _ in range(40):
        u, w = random_graphon(rng, 5), random_graphon(rng, 5)
        ex = cut_distance(u, w, method="exact")
        he = cut_distance(u, w, method="heuristic")
        assert he.lower <= ex.lower
        assert degree_l1(u, w) <= 2 * ex.lower
        total += 1
        hits += he.lower == ex.lower
    assert hits >= 0.95 * total


def test_mixing_constant_kernel():
    cp = StepGraphon.constant(F(1, 2), measures=(F(1, 6), F(1, 3), F(1, 2)))
    rep = markov_mixing(cp, 3)
    assert rep.stationary == cp.measures
    assert rep.rows[0] == (1, 0.0)


def test_mixing_bipartite_swap():
    rep = markov_mixing(SWAP, 70)
    assert rep.bipartite
    assert all(r[1] == 0.5 for r in rep.rows)
    assert all(r[2] == 0.0 and r[3] == 0.0 for r in rep.rows)
    assert rep.exact_steps == 64


@given(graphons(k_max=5))
@settings(max_examples=100, deadline=None)
def test_stationary_identity(w):
    if not is_connected(w) or mindeg(w) == 0:
        with pytest.raises(ModelError):
            markov_mixing(w, 1)
        return
    P = transition_matrix(w)
    pi = stationary_distribution(w)
    assert tuple(sum(pi[i] * P[i][j] for i in range(w.k)) for j in range(w.k)) == pi
