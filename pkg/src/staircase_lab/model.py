"""Exact-rational carriers for chip-firing: finite graphs, step graphons, chip configurations."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .rationals import to_fraction


class ModelError(ValueError):
    """Raised for invalid graphs, graphons, or configurations."""


@dataclass(frozen=True, eq=False)
class FiniteGraph:
    """Undirected multigraph without loops.

    ``multiplicities`` is a read-only symmetric integer matrix; ``e(u, v)`` is
    the number of edges joining ``u`` and ``v``.
    """

    n: int
    multiplicities: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.asarray(self.multiplicities)
        if e.shape != (self.n, self.n):
            raise ModelError(f"multiplicity matrix has shape {e.shape}, expected {(self.n, self.n)}")
        if self.n < 1:
            raise ModelError("a graph needs at least one vertex")
        if not np.issubdtype(e.dtype, np.integer):
            raise ModelError("multiplicities must be integers")
        if (e < 0).any():
            raise ModelError("multiplicities must be nonnegative")
        if (np.diagonal(e) != 0).any():
            raise ModelError("self-loops are not allowed")
        if not np.array_equal(e, e.T):
            raise ModelError("multiplicity matrix must be symmetric")
        e = e.copy()
        e.flags.writeable = False
        object.__setattr__(self, "multiplicities", e)
        deg = e.sum(axis=1, dtype=np.int64)
        deg.flags.writeable = False
        object.__setattr__(self, "_degrees", deg)

    @classmethod
    def from_edges(cls, n: int, edges) -> "FiniteGraph":
        """Build from ``(u, v)`` or ``(u, v, mult)`` triples; repeated pairs add up."""
        e = np.zeros((n, n), dtype=np.int64)
        for item in edges:
            if len(item) == 2:
                u, v = item
                mult = 1
            else:
                u, v, mult = item
            if not (0 <= u < n and 0 <= v < n):
                raise ModelError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise ModelError(f"self-loop at vertex {u}")
            if mult < 0:
                raise ModelError(f"negative multiplicity on edge ({u}, {v})")
            e[u, v] += mult
            e[v, u] += mult
        return cls(n, e)

    @classmethod
    def complete(cls, n: int) -> "FiniteGraph":
        e = np.ones((n, n), dtype=np.int64) - np.eye(n, dtype=np.int64)
        return cls(n, e)

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    def e(self, u: int, v: int) -> int:
        return int(self.multiplicities[u, v])

    def is_simple(self) -> bool:
        return bool((self.multiplicities <= 1).all())

    def edge_count(self) -> int:
        return int(self.multiplicities.sum()) // 2

    def __eq__(self, other):
        if not isinstance(other, FiniteGraph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.multiplicities, other.multiplicities)

    def __hash__(self):
        return hash((self.n, self.multiplicities.tobytes()))


@dataclass(frozen=True)
class StepGraphon:
    """Graphon constant on each block ``A_i x A_j`` of an interval partition of [0, 1].

    Part ``i`` is the interval of length ``measures[i]`` placed after parts
    ``0..i-1``; ``kernel[i][j]`` is the value on ``A_i x A_j``.
    """

    measures: tuple
    kernel: tuple

    def __post_init__(self):
        m = tuple(to_fraction(x) for x in self.measures)
        k = len(m)
        if k == 0:
            raise ModelError("a step graphon needs at least one part")
        if any(x <= 0 for x in m):
            raise ModelError("part measures must be positive")
        if sum(m) != 1:
            raise ModelError(f"part measures sum to {sum(m)}, not 1")
        rows = tuple(tuple(to_fraction(x) for x in row) for row in self.kernel)
        if len(rows) != k or any(len(r) != k for r in rows):
            raise ModelError(f"kernel must be {k}x{k}")
        for i in range(k):
            for j in range(k):
                w = rows[i][j]
                if not (0 <= w <= 1):
                    raise ModelError(f"kernel entry ({i}, {j}) = {w} outside [0, 1]")
                if w != rows[j][i]:
                    raise ModelError(f"kernel not symmetric at ({i}, {j})")
        object.__setattr__(self, "measures", m)
        object.__setattr__(self, "kernel", rows)

    @classmethod
    def constant(cls, p, k: int = 1, measures=None) -> "StepGraphon":
        """The constant graphon C_p, optionally split into ``k`` parts."""
        p = to_fraction(p)
        if measures is None:
            measures = [Fraction(1, k)] * k
        k = len(measures)
        return cls(tuple(measures), tuple((p,) * k for _ in range(k)))

    @property
    def k(self) -> int:
        return len(self.measures)

    def degrees(self) -> tuple:
        m = self.measures
        return tuple(sum(m[j] * row[j] for j in range(self.k)) for row in self.kernel)

    def coupling(self, i: int, j: int) -> Fraction:
        """Mass received by part ``i`` when part ``j`` fires once: m_j W_ij."""
        return self.measures[j] * self.kernel[i][j]


Model = Union[FiniteGraph, StepGraphon]

GRAPH = "graph"
GRAPHON = "graphon"


@dataclass(frozen=True)
class ChipConfig:
    """Nonnegative exact chip amounts, one per vertex (graph) or per part (graphon)."""

    values: tuple
    context: str = GRAPH

    def __post_init__(self):
        vals = tuple(to_fraction(v) for v in self.values)
        if self.context not in (GRAPH, GRAPHON):
            raise ModelError(f"unknown context {self.context!r}")
        for i, v in enumerate(vals):
            if v < 0:
                raise ModelError(f"negative chip amount {v} at index {i}")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __iter__(self):
        return iter(self.values)

    def __add__(self, other: "ChipConfig") -> "ChipConfig":
        _check_same_shape(self, other)
        return ChipConfig(tuple(a + b for a, b in zip(self.values, other.values)), self.context)

    def scaled(self, c) -> "ChipConfig":
        c = to_fraction(c)
        return ChipConfig(tuple(v * c for v in self.values), self.context)

    def shifted_by_degree(self, model: Model, y) -> "ChipConfig":
        """sigma + y * deg, the configuration sampled by the activity diagram at ``y``."""
        y = to_fraction(y)
        degs = degree_vector(model)
        check_carrier(model, self)
        return ChipConfig(tuple(v + y * d for v, d in zip(self.values, degs)), self.context)

    @classmethod
    def zeros(cls, size: int, context: str = GRAPH) -> "ChipConfig":
        return cls((Fraction(0),) * size, context)


def _check_same_shape(a: ChipConfig, b: ChipConfig):
    if a.context != b.context or len(a) != len(b):
        raise ModelError("configurations live on different carriers")


def context_of(model: Model) -> str:
    return GRAPHON if isinstance(model, StepGraphon) else GRAPH


def size_of(model: Model) -> int:
    return model.k if isinstance(model, StepGraphon) else model.n


def check_carrier(model: Model, sigma: ChipConfig):
    if sigma.context != context_of(model):
        raise ModelError(f"{sigma.context} configuration used on a {context_of(model)} model")
    if len(sigma) != size_of(model):
        raise ModelError(f"configuration has {len(sigma)} entries, carrier has {size_of(model)}")


def degree(model: Model, index: int) -> Fraction:
    """Degree of a graph vertex (edge count) or of a graphon part (sum of m_j W_ij)."""
    size = size_of(model)
    if not (0 <= index < size):
        raise IndexError(f"index {index} out of range for carrier of size {size}")
    if isinstance(model, StepGraphon):
        row = model.kernel[index]
        return sum((model.measures[j] * row[j] for j in range(model.k)), Fraction(0))
    return Fraction(int(model.degrees[index]))


def degree_vector(model: Model) -> tuple:
    if isinstance(model, StepGraphon):
        return model.degrees()
    return tuple(Fraction(int(d)) for d in model.degrees)


def from_graph(g: FiniteGraph) -> StepGraphon:
    """The graphon W_G: n parts of measure 1/n with a 0/1 kernel."""
    if not g.is_simple():
        raise ModelError("multigraph has a multiplicity above 1; kernel must lie in [0, 1]")
    n = g.n
    m = (Fraction(1, n),) * n
    one, zero = Fraction(1), Fraction(0)
    rows = tuple(tuple(one if x else zero for x in row) for row in g.multiplicities.tolist())
    return StepGraphon(m, rows)


def scale_config_to_graphon(g: FiniteGraph, sigma: ChipConfig) -> ChipConfig:
    """Graphon version of a graph configuration: part i carries sigma(v_i)/n."""
    check_carrier(g, sigma)
    if not g.is_simple():
        raise ModelError("multigraph has a multiplicity above 1; kernel must lie in [0, 1]")
    n = g.n
    return ChipConfig(tuple(v / n for v in sigma.values), GRAPHON)


def _weights(model: Model | None, sigma: ChipConfig) -> Sequence[Fraction]:
    if sigma.context == GRAPHON:
        if model is None:
            raise ModelError("graphon L1 norm needs the part measures")
        return model.measures
    return (Fraction(1),) * len(sigma)


def l1_norm(sigma: ChipConfig, model: Model | None = None) -> Fraction:
    """Total chips (graph) or measure-weighted integral (graphon)."""
    if model is not None:
        check_carrier(model, sigma)
    w = _weights(model, sigma)
    return sum((wi * abs(v) for wi, v in zip(w, sigma.values)), Fraction(0))


def l1_distance(a: ChipConfig, b: ChipConfig, model: Model | None = None) -> Fraction:
    _check_same_shape(a, b)
    if model is not None:
        check_carrier(model, a)
    w = _weights(model, a)
    return sum((wi * abs(x - y) for wi, x, y in zip(w, a.values, b.values)), Fraction(0))
