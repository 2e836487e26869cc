import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import graphs
from staircase_lab.model import (
    GRAPH,
    GRAPHON,
    ChipConfig,
    FiniteGraph,
    ModelError,
    StepGraphon,
    degree,
    degree_vector,
    from_graph,
    l1_distance,
    l1_norm,
    scale_config_to_graphon,
)

F = Fraction


def test_degrees():
    assert degree(StepGraphon.constant(F(1, 3), k=3), 1) == F(1, 3)
    assert degree(FiniteGraph.complete(3), 2) == 2
    w = StepGraphon((F(1, 2), F(1, 2)), ((0, 1), (1, 0)))
    assert degree(w, 0) == F(1, 2)


def test_from_graph_examples():
    w = from_graph(FiniteGraph.complete(3))
    assert w.measures == (F(1, 3),) * 3
    assert w.kernel == ((0, 1, 1), (1, 0, 1), (1, 1, 0))
    assert degree_vector(w) == (F(2, 3),) * 3
    single = from_graph(FiniteGraph(1, np.zeros((1, 1), dtype=int)))
    assert single.kernel == ((0,),)
    empty = from_graph(FiniteGraph(4, np.zeros((4, 4), dtype=int)))
    assert all(d == 0 for d in degree_vector(empty))


def test_from_graph_rejects_multigraph():
    g = FiniteGraph.from_edges(2, [(0, 1, 2)])
    with pytest.raises(ModelError):
        from_graph(g)


@given(graphs(n_max=8))
@settings(max_examples=100, deadline=None)
def test_from_graph_degree_scaling(g):
    w = from_graph(g)
    for i in range(g.n):
        assert degree(w, i) * g.n == degree(g, i)


def test_scale_config():
    g = FiniteGraph.complete(3)
    s = scale_config_to_graphon(g, ChipConfig((2, 1, 0)))
    assert s.values == (F(2, 3), F(1, 3), 0) and s.context == GRAPHON
    assert scale_config_to_graphon(g, ChipConfig.zeros(3)).values == (0, 0, 0)
    one = FiniteGraph(1, np.zeros((1, 1), dtype=int))
    assert scale_config_to_graphon(one, ChipConfig((5,))).values == (5,)


def test_l1():
    w = StepGraphon.constant(1, k=2)
    a = ChipConfig((1, 3), GRAPHON)
    b = ChipConfig((1, 1), GRAPHON)
    assert l1_distance(a, b, w) == 1
    assert l1_distance(a, a, w) == 0
    assert l1_norm(ChipConfig((2, 1, 0)), FiniteGraph.complete(3)) == 3
    with pytest.raises(ModelError):
        l1_norm(a)


def test_validation():
    with pytest.raises(ModelError):
        StepGraphon((F(1, 2), F(1, 3)), ((1, 1), (1, 1)))
    with pytest.raises(ModelError):
        StepGraphon((F(1, 2), F(1, 2)), ((1, F(1, 2)), (1, 1)))
    with pytest.raises(ModelError):
        StepGraphon((1,), ((2,),))
    with pytest.raises(ModelError):
        ChipConfig((1, -1))
    with pytest.raises(ModelError):
        FiniteGraph(2, np.array([[1, 0], [0, 0]]))
    with pytest.raises(ModelError):
        FiniteGraph(2, np.array([[0, 1], [0, 0]]))


def test_graph_is_frozen():
    g = FiniteGraph.complete(3)
    with pytest.raises(ValueError):
        g.multiplicities[0, 1] = 5
    assert g == FiniteGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert hash(g) == hash(FiniteGraph.complete(3))


def test_shifted_by_degree():
    w = StepGraphon((F(1, 2), F(1, 2)), ((0, 1), (1, 0)))
    s = ChipConfig((0, F(1, 4)), GRAPHON).shifted_by_degree(w, F(1, 2))
    assert s.values == (F(1, 4), F(1, 2))
    with pytest.raises(ModelError):
        ChipConfig((0, 0)).shifted_by_degree(w, 1)
