"""Collaboration graphs and piecewise-constant topology schedules."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DisconnectedGraph,
    InfeasibleDegree,
    IterOutOfRange,
    SelfLoop,
    UnknownNode,
)

Edge = tuple[int, int]


def _norm_edge(v: int, w: int) -> Edge:
    return (v, w) if v < w else (w, v)


@dataclass(frozen=True)
class Topology:
    """Undirected, connected graph without self-loops.

    Edges are stored once as ``(min, max)`` pairs; use :func:`build_topology`
    to construct a validated instance from arbitrary input.
    """

    node_ids: frozenset[int]
    edges: frozenset[Edge]
    _adj: dict[int, frozenset[int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        adj: dict[int, set[int]] = {v: set() for v in self.node_ids}
        for v, w in self.edges:
            adj[v].add(w)
            adj[w].add(v)
        object.__setattr__(self, "_adj", {v: frozenset(ns) for v, ns in adj.items()})

    @property
    def size(self) -> int:
        return len(self.node_ids)

    def neighbors(self, v: int) -> frozenset[int]:
        try:
            return self._adj[v]
        except KeyError:
            raise UnknownNode(f"node {v} not in topology") from None

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def sorted_nodes(self) -> list[int]:
        return sorted(self.node_ids)

    def is_connected(self) -> bool:
        return _bfs_reach(self._adj) == len(self.node_ids)


def _bfs_reach(adj: dict[int, Iterable[int]]) -> int:
    if not adj:
        return 0
    start = min(adj)
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen)


def build_topology(node_ids: Iterable[int], edges: Iterable[Sequence[int]]) -> Topology:
    nodes = frozenset(int(v) for v in node_ids)
    if not nodes:
        raise ValueError("node_ids must be nonempty")
    normed = set()
    for e in edges:
        v, w = int(e[0]), int(e[1])
        if v == w:
            raise SelfLoop(f"self-loop on node {v}")
        if v not in nodes or w not in nodes:
            raise UnknownNode(f"edge ({v}, {w}) references a node outside node_ids")
        normed.add(_norm_edge(v, w))
    topo = Topology(nodes, frozenset(normed))
    if not topo.is_connected():
        raise DisconnectedGraph(
            f"graph with {len(nodes)} nodes and {len(normed)} edges is not connected"
        )
    return topo


def neighbors(t: Topology, v: int) -> frozenset[int]:
    return t.neighbors(v)


# --- common shapes -------------------------------------------------------

def path_graph(p: int, start: int = 0) -> Topology:
    ids = range(start, start + p)
    return build_topology(ids, [(v, v + 1) for v in ids[:-1]])


def ring_graph(p: int, start: int = 0) -> Topology:
    if p < 3:
        return path_graph(p, start)
    ids = list(range(start, start + p))
    return build_topology(ids, [(ids[i], ids[(i + 1) % p]) for i in range(p)])


def star_graph(p: int, center: int = 0) -> Topology:
    """Star with ``center`` and leaves ``center+1 .. center+p-1``."""
    leaves = range(center + 1, center + p)
    return build_topology([center, *leaves], [(center, w) for w in leaves])


def complete_graph(p: int, start: int = 0) -> Topology:
    ids = list(range(start, start + p))
    return build_topology(ids, [(v, w) for i, v in enumerate(ids) for w in ids[i + 1:]])


def random_connected(p: int, avg_degree: float, seed: int) -> Topology:
    """Random spanning tree plus uniformly drawn extra edges.

    The edge count is ``round(avg_degree * p / 2)``, which must lie between
    ``p - 1`` (a tree) and ``p (p - 1) / 2`` (complete graph).
    """
    if p < 1:
        raise InfeasibleDegree("need at least one node")
    if p == 1:
        return build_topology([0], [])
    n_edges = int(round(avg_degree * p / 2))
    max_edges = p * (p - 1) // 2
    if n_edges < p - 1 or n_edges > max_edges:
        raise InfeasibleDegree(
            f"avg_degree={avg_degree} gives {n_edges} edges; need {p - 1}..{max_edges} for p={p}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(p)
    edges: set[Edge] = set()
    for i in range(1, p):
        parent = order[rng.integers(0, i)]
        edges.add(_norm_edge(int(order[i]), int(parent)))
    candidates = [(v, w) for v in range(p) for w in range(v + 1, p) if (v, w) not in edges]
    extra = n_edges - len(edges)
    if extra:
        picks = rng.choice(len(candidates), size=extra, replace=False)
        edges.update(candidates[i] for i in sorted(picks))
    return build_topology(range(p), edges)


# --- schedules -----------------------------------------------------------

@dataclass(frozen=True)
class TopologySchedule:
    """Ordered phases ``(topology, duration)``; phase i covers a half-open
    iteration range ``[start_i, start_i + k_i)``."""

    phases: tuple[tuple[Topology, int], ...]

    def __post_init__(self):
        if not self.phases:
            raise ValueError("schedule needs at least one phase")
        for topo, k in self.phases:
            if int(k) < 1:
                raise ValueError(f"phase duration must be >= 1, got {k}")
            if not topo.is_connected():
                raise DisconnectedGraph("schedule contains a disconnected topology")

    @classmethod
    def fixed(cls, topo: Topology, T: int) -> "TopologySchedule":
        return cls(((topo, int(T)),))

    @property
    def total_duration(self) -> int:
        return sum(k for _, k in self.phases)

    @property
    def boundaries(self) -> list[int]:
        starts = [0]
        for _, k in self.phases[:-1]:
            starts.append(starts[-1] + k)
        return starts

    def phase_index(self, it: int) -> int:
        if not 0 <= it < self.total_duration:
            raise IterOutOfRange(f"iteration {it} outside [0, {self.total_duration})")
        acc = 0
        for i, (_, k) in enumerate(self.phases):
            acc += k
            if it < acc:
                return i
        raise AssertionError("unreachable")

    def all_node_ids(self) -> frozenset[int]:
        return frozenset().union(*(t.node_ids for t, _ in self.phases))


def topology_at(s: TopologySchedule, it: int) -> Topology:
    return s.phases[s.phase_index(it)][0]
