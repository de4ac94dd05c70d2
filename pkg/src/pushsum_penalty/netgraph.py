"""
Time-varying directed communication graphs.

Nodes are ``0 .. n-1``.  An edge ``(j, i)`` means node ``i`` receives from
node ``j``.  Every node is its own in- and out-neighbour, so out-degrees
count the self-loop and the push-sum weights ``1/d_j`` form a column
stochastic matrix.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "DiGraph",
    "GraphSchedule",
    "union_graph",
    "is_strongly_connected",
    "verify_B",
    "certify_B",
    "mixing_weights",
    "mixing_matrix",
    "alternate",
    "round_robin",
    "SeededRandomSelector",
    "parse_selector",
    "demo_graphs",
]


@dataclass(frozen=True)
class DiGraph:
    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        es = set()
        for j, i in self.edges:
            j, i = int(j), int(i)
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise ValueError(f"edge ({j}, {i}) outside node range 0..{self.n - 1}")
            es.add((j, i))
        es.update((k, k) for k in range(self.n))
        object.__setattr__(self, "edges", frozenset(es))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable, one_based: bool = False) -> "DiGraph":
        off = 1 if one_based else 0
        return cls(n, frozenset((int(j) - off, int(i) - off) for j, i in edges))

    @cached_property
    def out_neighbors(self) -> tuple:
        out = [[] for _ in range(self.n)]
        for j, i in sorted(self.edges):
            out[j].append(i)
        return tuple(tuple(o) for o in out)

    @cached_property
    def in_neighbors(self) -> tuple:
        inn = [[] for _ in range(self.n)]
        for j, i in sorted(self.edges):
            inn[i].append(j)
        return tuple(tuple(o) for o in inn)

    def out_degree(self, j: int) -> int:
        return len(self.out_neighbors[j])

    @cached_property
    def matrix(self) -> np.ndarray:
        m = mixing_matrix(self)
        m.flags.writeable = False
        return m


def mixing_weights(g: DiGraph, j: int) -> dict:
    """Weight node ``j`` pushes to each of its out-neighbours (itself included)."""
    if not 0 <= j < g.n:
        raise ValueError(f"node {j} not in graph")
    d = g.out_degree(j)
    return {i: 1.0 / d for i in g.out_neighbors[j]}


def mixing_matrix(g: DiGraph) -> np.ndarray:
    """Dense ``n x n`` matrix with entry ``[i, j] = 1/d_j`` for each edge ``j -> i``."""
    m = np.zeros((g.n, g.n))
    for j in range(g.n):
        for i, w in mixing_weights(g, j).items():
            m[i, j] = w
    return m


def _reach(adj: Sequence[Sequence[int]], start: int) -> set:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def is_strongly_connected(g: DiGraph) -> bool:
    """Forward and backward reachability from node 0 both cover the graph."""
    if g.n == 1:
        return True
    return len(_reach(g.out_neighbors, 0)) == g.n and len(_reach(g.in_neighbors, 0)) == g.n


def alternate(t: int) -> int:
    return t % 2


def round_robin(count: int) -> Callable[[int], int]:
    def select(t: int) -> int:
        return t % count

    return select


class SeededRandomSelector:
    """Markov switching signal: each round, with probability ``p``, jump to a
    uniformly chosen different graph; otherwise stay.  Starts on graph 0.

    Values are generated lazily and cached, so ``select(t)`` is a pure
    function of ``(p, seed, t)``.
    """

    def __init__(self, count: int, p: float, seed: int):
        if not 0.0 <= p <= 1.0:
            raise ValueError("switch probability must lie in [0, 1]")
        self.count, self.p, self.seed = count, p, seed
        self._rng = np.random.default_rng(seed)
        self._seq = [0]

    def __call__(self, t: int) -> int:
        while len(self._seq) <= t:
            cur = self._seq[-1]
            if self.count > 1 and self._rng.random() < self.p:
                step = int(self._rng.integers(1, self.count))
                cur = (cur + step) % self.count
            self._seq.append(cur)
        return self._seq[t]


_RANDOM_RE = re.compile(r"^seeded-random\(\s*([0-9.eE+-]+)\s*,\s*(-?\d+)\s*\)$")


def parse_selector(spec: str, count: int, default_seed: int = 0):
    """Build ``(selector, period)`` from ``"alternate"``, ``"round-robin"`` or
    ``"seeded-random(p, seed)"``.  ``period`` is ``None`` for random signals."""
    spec = spec.strip()
    if spec == "alternate":
        if count != 2:
            raise ValueError(f"'alternate' needs exactly 2 graphs, got {count}")
        return alternate, 2
    if spec == "round-robin":
        return round_robin(count), count
    if spec == "seeded-random":
        return SeededRandomSelector(count, 0.5, default_seed), None
    m = _RANDOM_RE.match(spec)
    if m:
        return SeededRandomSelector(count, float(m.group(1)), int(m.group(2))), None
    raise ValueError(f"unknown selector {spec!r}")


@dataclass
class GraphSchedule:
    """Graph sequence ``G(t) = graphs[selector(t)]``."""

    graphs: Sequence[DiGraph]
    selector: Callable[[int], int] = alternate
    claimed_B: Optional[int] = None
    period: Optional[int] = None

    def __post_init__(self):
        self.graphs = tuple(self.graphs)
        if not self.graphs:
            raise ValueError("schedule needs at least one graph")
        ns = {g.n for g in self.graphs}
        if len(ns) != 1:
            raise ValueError(f"graphs disagree on node count: {sorted(ns)}")

    @property
    def n(self) -> int:
        return self.graphs[0].n

    def graph_at(self, t: int) -> DiGraph:
        return self.graphs[self.selector(t)]

    def matrix_at(self, t: int) -> np.ndarray:
        return self.graph_at(t).matrix

    @classmethod
    def static(cls, g: DiGraph) -> "GraphSchedule":
        return cls([g], round_robin(1), claimed_B=None, period=1)


def union_graph(s: GraphSchedule, t: int, B: int) -> DiGraph:
    """Edge union of ``G(t), ..., G(t+B-1)``."""
    if B < 1:
        raise ValueError("B must be positive")
    edges = set()
    for k in range(t, t + B):
        edges |= s.graph_at(k).edges
    return DiGraph(s.n, frozenset(edges))


def verify_B(s: GraphSchedule, B: int, horizon: int) -> bool:
    """True iff every window start ``t in [0, horizon - B]`` gives a strongly
    connected union."""
    if horizon < B:
        raise ValueError("horizon must be at least B")
    seen = {}
    for t in range(0, horizon - B + 1):
        key = tuple(s.selector(k) for k in range(t, t + B))
        if key not in seen:
            seen[key] = is_strongly_connected(union_graph(s, t, B))
        if not seen[key]:
            return False
    return True


def certify_B(s: GraphSchedule, B: int, horizon: int = 1000) -> bool:
    """Exact for periodic selectors (checks one period plus ``B``); otherwise a
    finite-horizon check over ``horizon`` rounds."""
    if s.period is not None:
        horizon = s.period + B
    return verify_B(s, B, max(horizon, B))


def demo_graphs() -> tuple:
    """The two 4-node graphs of the demo network (neither strongly connected,
    their union is)."""
    g1 = DiGraph.from_edges(4, [(1, 2), (2, 3), (2, 4)], one_based=True)
    g2 = DiGraph.from_edges(4, [(4, 2), (4, 1), (3, 4)], one_based=True)
    return g1, g2
