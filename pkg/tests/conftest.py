"""Shared oracles and generators. The oracle engine is deliberately naive and shares no code with the library."""

from __future__ import annotations

import math
import random
from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from staircase_lab.model import GRAPH, GRAPHON, ChipConfig, FiniteGraph, StepGraphon


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


# naive oracle ------------------------------------------------------------------


def oracle_parts(model):
    """(degrees, coupling[i][j]) straight from the definitions."""
    if isinstance(model, FiniteGraph):
        e = model.multiplicities
        n = model.n
        cpl = [[Fraction(int(e[i, j])) for j in range(n)] for i in range(n)]
        deg = [sum(row) for row in cpl]
        return deg, cpl
    m, w = model.measures, model.kernel
    k = len(m)
    cpl = [[m[j] * w[i][j] for j in range(k)] for i in range(k)]
    deg = [sum(row) for row in cpl]
    return deg, cpl


def oracle_step(deg, cpl, x):
    f = [0 if d == 0 else math.floor(v / d) for v, d in zip(x, deg)]
    n = len(x)
    y = tuple(x[i] - deg[i] * f[i] + sum(cpl[i][j] * f[j] for j in range(n)) for i in range(n))
    return y, f


def oracle_activity(model, values, replay_periods=3):
    """Floyd cycle detection on exact states, then replay ``replay_periods`` periods.

    Returns (per-site fire rate over the replay, period, transient).
    """
    deg, cpl = oracle_parts(model)
    x0 = tuple(Fraction(v) for v in values)

    def nxt(x):
        return oracle_step(deg, cpl, x)[0]

    tort, hare = nxt(x0), nxt(nxt(x0))
    while tort != hare:
        tort, hare = nxt(tort), nxt(nxt(hare))
    mu = 0
    tort = x0
    while tort != hare:
        tort, hare = nxt(tort), nxt(hare)
        mu += 1
    lam = 1
    hare = nxt(tort)
    while tort != hare:
        hare = nxt(hare)
        lam += 1
    x = x0
    for _ in range(mu):
        x = nxt(x)
    fires = [0] * len(x0)
    for _ in range(replay_periods * lam):
        x, f = oracle_step(deg, cpl, x)
        fires = [a + b for a, b in zip(fires, f)]
    rates = [Fraction(c, replay_periods * lam) for c in fires]
    return rates, lam, mu


# random instances --------------------------------------------------------------


def random_graph(rng: random.Random, n_max: int = 8, multi: bool = False) -> FiniteGraph:
    n = rng.randint(1, n_max)
    e = np.zeros((n, n), dtype=np.int64)
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < 0.5:
                e[u, v] = e[v, u] = rng.randint(1, 3) if multi else 1
    return FiniteGraph(n, e)


def random_measures(rng: random.Random, k: int, den: int = 12) -> tuple:
    cuts = sorted(rng.sample(range(1, den * k), k - 1)) if k > 1 else []
    pts = [0] + cuts + [den * k]
    return tuple(Fraction(b - a, den * k) for a, b in zip(pts, pts[1:]))


def random_graphon(rng: random.Random, k_max: int = 5, den: int = 6, zero_prob: float = 0.2) -> StepGraphon:
    k = rng.randint(1, k_max)
    m = random_measures(rng, k)
    w = [[Fraction(0)] * k for _ in range(k)]
    for i in range(k):
        for j in range(i, k):
            v = Fraction(0) if rng.random() < zero_prob else Fraction(rng.randint(1, den), den)
            w[i][j] = w[j][i] = v
    return StepGraphon(m, tuple(tuple(r) for r in w))


def random_config(rng: random.Random, model, scale: int = 3, den: int = 10) -> ChipConfig:
    if isinstance(model, FiniteGraph):
        deg = model.degrees
        return ChipConfig(tuple(rng.randint(0, scale * max(int(d), 1)) for d in deg), GRAPH)
    degs = model.degrees()
    vals = []
    for d in degs:
        top = scale * max(d, Fraction(1, 2))
        vals.append(Fraction(rng.randint(0, int(top * den)), den))
    return ChipConfig(tuple(vals), GRAPHON)


# hypothesis strategies ---------------------------------------------------------


@st.composite
def graphs(draw, n_max=6):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_graph(random.Random(seed), n_max)


@st.composite
def graphons(draw, k_max=4):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_graphon(random.Random(seed), k_max)


@st.composite
def systems(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = random.Random(seed)
    model = random_graph(rng, 6) if rng.random() < 0.5 else random_graphon(rng, 4)
    return model, random_config(rng, model)
