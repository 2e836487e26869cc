import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from staircase_lab.circle import (
    CircleMap,
    CircleMapError,
    affine,
    build_f_sigma,
    build_phi,
    f_mu,
    rotation_number,
    sigma_bar,
    u_sigma_mu,
    y_of_mu,
)
from staircase_lab.engine import activity
from staircase_lab.model import GRAPHON, ChipConfig, StepGraphon

F = Fraction
LOG2 = math.log(2)


def fine_identity(n):
    return ChipConfig(tuple(F(i, n) for i in range(n)), GRAPHON)


def test_f_sigma_zero():
    f = build_f_sigma(ChipConfig((0, 0), GRAPHON))
    assert all(v == 0 for _, v in f.sample(16))


def test_f_sigma_fine_identity():
    n = 200
    f = build_f_sigma(fine_identity(n))
    for x, v in f.sample(64):
        assert abs(v - x) <= F(1, n)


def test_f_sigma_single_atom_at_three_halves():
    f = build_f_sigma(ChipConfig((F(3, 2),), GRAPHON))
    assert f(F(0)) == 1 and f(F(49, 100)) == 1
    assert f(F(1, 2)) == 2 and f(F(99, 100)) == 2
    assert f(F(1)) == f(F(0)) + 1


def test_f_sigma_rejects_unconfined():
    with pytest.raises(CircleMapError):
        build_f_sigma(ChipConfig((2,), GRAPHON))


def test_phi_examples():
    n = 200
    y = F(2, 7)
    phi = build_phi(fine_identity(n), y)
    for x, v in phi.sample(64):
        if x > 0:
            assert abs(v - (x + y)) <= F(1, n)
    ident = build_phi(fine_identity(n), 0)
    for x, v in ident.sample(64):
        assert abs(v - x) <= F(1, n)
    atom = build_phi(ChipConfig((0,), GRAPHON), 0)
    assert not atom.continuous
    with pytest.raises(CircleMapError):
        build_phi(ChipConfig((1,), GRAPHON), 0)


def test_f_mu_at_log2():
    p = 0.5
    f = CircleMap.geometric_at_log2(p)
    assert f(0.0) == 1.0
    for x in np.linspace(0, 0.99, 12):
        assert f(float(x)) == pytest.approx(2 ** x, rel=1e-12)
    assert f(1.0) == f(0.0) + 1


def test_f_mu_increasing_in_mu():
    p = 0.5
    mus = np.linspace(0.05, p / LOG2, 20)
    vals = [f_mu(m, p)(0.5) for m in mus]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_geometric_closed_forms():
    p = 0.5
    mu = p / LOG2
    assert y_of_mu(mu, p) == pytest.approx(p, rel=1e-12)
    assert sigma_bar(mu, p, 0.0) == pytest.approx(y_of_mu(mu, p))
    assert sigma_bar(mu, p, 1.0) == pytest.approx(2 * p, rel=1e-12)


@pytest.mark.parametrize("mu", [0.2, 0.5, 0.72])
def test_level_set_distribution_identity(mu):
    # lambda{U sigma^mu < x} on a midpoint grid in v against the inverse of sigma_bar
    p = 0.5
    y = y_of_mu(mu, p)
    vs = (np.arange(200_000) + 0.5) / 200_000
    us = np.array([u_sigma_mu(mu, p, v) for v in vs[::10]])
    for x in np.linspace(y, y + p, 9)[1:-1]:
        emp = float((us < x).mean())
        closed = -math.expm1(-(x - y) / mu) / -math.expm1(-p / mu)
        assert emp == pytest.approx(closed, abs=2e-4)
        # sigma_bar is increasing, so its sublevel set is [0, v*) with v* the closed form
        assert sigma_bar(mu, p, closed) == pytest.approx(x, abs=1e-12)


def test_rotation_examples():
    c = F(3, 7)
    r = rotation_number(affine(c), 1000)
    assert r.lower == c - F(1, 1000) and r.upper == c + F(1, 1000) and r.midpoint == c
    r = rotation_number(CircleMap.geometric_at_log2(0.5), 100_000)
    assert r.contains(1.0) and r.width <= 2e-5 + 1e-15
    y = F(1, 3)
    r = rotation_number(build_phi(fine_identity(300), y), 5000)
    assert abs(r.midpoint - y) <= F(1, 300) + F(1, 5000)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_lift_properties(seed):
    rng = random.Random(seed)
    k = rng.randint(1, 6)
    sigma = ChipConfig(tuple(F(rng.randint(0, 39), 20) for _ in range(k)), GRAPHON)
    f = build_f_sigma(sigma)
    assert f.check_monotone()
    for _ in range(10):
        x = F(rng.randint(-100, 100), rng.randint(1, 50))
        assert f(x + 1) == f(x) + 1


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_rotation_monotone_in_map(seed):
    rng = random.Random(seed)
    k = rng.randint(1, 5)
    sigma = ChipConfig(tuple(F(rng.randint(0, 19), 20) for _ in range(k)), GRAPHON)
    y1 = F(rng.randint(0, 20), 20)
    y2 = y1 + F(rng.randint(0, 20), 20)
    n = 500
    r1 = rotation_number(build_phi(sigma, y1), n)
    r2 = rotation_number(build_phi(sigma, y2), n)
    assert r1.lower <= r2.upper + F(2, n)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_conjugation_with_activity(seed):
    rng = random.Random(seed)
    k = rng.randint(1, 5)
    sigma = ChipConfig(tuple(F(v, 40) for v in rng.sample(range(40), k)), GRAPHON)
    y = F(rng.randint(0, 60), 60)
    w = StepGraphon.constant(1, k=k)
    a = activity(w, sigma.shifted_by_degree(w, y))
    r = rotation_number(build_phi(sigma, y), 4000)
    assert r.contains(a.value)


@given(st.integers(0, 2**32 - 1), st.sampled_from([F(1, 4), F(1, 2), F(3, 4)]))
@settings(max_examples=30, deadline=None)
def test_rescaling_through_rotation(seed, p):
    rng = random.Random(seed)
    k = rng.randint(1, 4)
    # stable on C_p: values below p; sigma / p is stable on C_1
    sigma = ChipConfig(tuple(p * F(v, 40) for v in rng.sample(range(40), k)), GRAPHON)
    y = F(rng.randint(0, 40), 40)
    cp = StepGraphon.constant(p, k=k)
    a = activity(cp, sigma.shifted_by_degree(cp, y))
    r = rotation_number(build_phi(sigma.scaled(1 / p), y), 4000)
    assert r.contains(a.value)
