"""Directed weighted networks and balanced transshipment problems.

Node labels are strings at the boundary and dense integer indices inside.
Each edge carries one positive weight that is both its length in the flux
law and its unit shipping cost.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DuplicateEdge, DuplicateNode, NonPositiveCost, SelfLoop, UnknownEndpoint

BALANCE_RTOL = 1e-9


@dataclass(frozen=True)
class Edge:
    tail: str
    head: str
    cost: float

    def as_tuple(self) -> tuple[str, str, float]:
        return (self.tail, self.head, self.cost)


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable directed graph.

    ``adjacency[i]`` lists ``(edge_index, sign)`` pairs for node ``i``, with
    sign ``+1`` for edges leaving the node and ``-1`` for edges entering it.
    The numpy views ``tails``, ``heads`` and ``costs`` are read-only.
    """

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    index: Mapping[str, int] = field(init=False, repr=False)
    adjacency: tuple[tuple[tuple[int, int], ...], ...] = field(init=False, repr=False)
    tails: np.ndarray = field(init=False, repr=False)
    heads: np.ndarray = field(init=False, repr=False)
    costs: np.ndarray = field(init=False, repr=False)
    _pairs: Mapping[tuple[str, str], int] = field(init=False, repr=False)

    def __post_init__(self):
        index = {label: i for i, label in enumerate(self.nodes)}
        adj: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
        tails = np.empty(len(self.edges), dtype=np.intp)
        heads = np.empty(len(self.edges), dtype=np.intp)
        costs = np.empty(len(self.edges), dtype=float)
        pairs = {}
        for k, e in enumerate(self.edges):
            u, v = index[e.tail], index[e.head]
            tails[k], heads[k], costs[k] = u, v, e.cost
            adj[u].append((k, +1))
            adj[v].append((k, -1))
            pairs[(e.tail, e.head)] = k
        for arr in (tails, heads, costs):
            arr.setflags(write=False)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "adjacency", tuple(tuple(a) for a in adj))
        object.__setattr__(self, "tails", tails)
        object.__setattr__(self, "heads", heads)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "_pairs", pairs)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __hash__(self):
        return hash((self.nodes, self.edges))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_index(self, tail: str, head: str) -> int:
        """Index of the edge ``tail -> head``; raises ``KeyError`` if absent."""
        return self._pairs[(tail, head)]

    def has_edge(self, tail: str, head: str) -> bool:
        return (tail, head) in self._pairs

    def outgoing(self, node: str) -> list[int]:
        return [k for k, s in self.adjacency[self.index[node]] if s > 0]

    def incoming(self, node: str) -> list[int]:
        return [k for k, s in self.adjacency[self.index[node]] if s < 0]

    def edge_triples(self) -> list[tuple[str, str, float]]:
        return [e.as_tuple() for e in self.edges]

    def with_costs(self, costs: Sequence[float]) -> "Network":
        """Same topology, new per-edge costs (validated)."""
        if len(costs) != self.n_edges:
            raise ValueError(f"expected {self.n_edges} costs, got {len(costs)}")
        return build_network(
            self.nodes, [(e.tail, e.head, c) for e, c in zip(self.edges, costs)]
        )

    def reachable_from(self, starts: Iterable[str]) -> set[str]:
        seen = {self.index[s] for s in starts}
        queue = deque(seen)
        while queue:
            u = queue.popleft()
            for k, sign in self.adjacency[u]:
                if sign > 0:
                    v = int(self.heads[k])
                    if v not in seen:
                        seen.add(v)
                        queue.append(v)
        return {self.nodes[i] for i in seen}


def build_network(nodes: Sequence[str], edges: Iterable[Sequence]) -> Network:
    """Build a :class:`Network` from node labels and ``(tail, head, cost)`` triples.

    Node and edge order are preserved exactly as given.
    """
    labels = tuple(str(n) for n in nodes)
    seen: set[str] = set()
    for label in labels:
        if label in seen:
            raise DuplicateNode(f"duplicate node {label!r}")
        seen.add(label)

    out: list[Edge] = []
    pairs: set[tuple[str, str]] = set()
    for triple in edges:
        tail, head, cost = triple
        tail, head = str(tail), str(head)
        for end in (tail, head):
            if end not in seen:
                raise UnknownEndpoint(f"edge {tail}->{head} references unknown node {end!r}")
        if tail == head:
            raise SelfLoop(f"self-loop on node {tail!r}")
        cost = float(cost)
        if not (cost > 0 and math.isfinite(cost)):
            raise NonPositiveCost(f"edge {tail}->{head} has non-positive or non-finite cost {cost!r}")
        if (tail, head) in pairs:
            raise DuplicateEdge(f"duplicate edge {tail}->{head}")
        pairs.add((tail, head))
        out.append(Edge(tail, head, cost))
    return Network(labels, tuple(out))


@dataclass(frozen=True, eq=False)
class FlowProblem:
    """A network plus supply rates at sources and demand rates at sinks.

    Construction does not validate; call :func:`validate_problem`.
    """

    network: Network
    supplies: Mapping[str, float]
    demands: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "supplies", {str(k): float(v) for k, v in self.supplies.items()})
        object.__setattr__(self, "demands", {str(k): float(v) for k, v in self.demands.items()})

    def __eq__(self, other):
        if not isinstance(other, FlowProblem):
            return NotImplemented
        return (
            self.network == other.network
            and self.supplies == other.supplies
            and self.demands == other.demands
        )

    def supply_vector(self) -> np.ndarray:
        vec = np.zeros(self.network.n_nodes)
        for label, value in self.supplies.items():
            vec[self.network.index[label]] = value
        return vec

    def demand_vector(self) -> np.ndarray:
        vec = np.zeros(self.network.n_nodes)
        for label, value in self.demands.items():
            vec[self.network.index[label]] = value
        return vec

    @property
    def total_supply(self) -> float:
        return math.fsum(self.supplies.values())

    @property
    def total_demand(self) -> float:
        return math.fsum(self.demands.values())

    def with_costs(self, changes: Mapping[tuple[str, str], float]) -> "FlowProblem":
        """Copy with selected edge costs replaced. Unknown edges raise ``KeyError``."""
        costs = list(self.network.costs)
        for (tail, head), cost in changes.items():
            costs[self.network.edge_index(tail, head)] = cost
        return FlowProblem(self.network.with_costs(costs), self.supplies, self.demands)


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.errors

    def __bool__(self):
        return self.valid


def validate_problem(problem: FlowProblem) -> ValidationReport:
    """Collect every violated invariant of ``problem`` (never raises)."""
    report = ValidationReport()
    net = problem.network
    for role, table in (("supply", problem.supplies), ("demand", problem.demands)):
        for label, value in table.items():
            if label not in net.index:
                report.errors.append(f"{role} node {label!r} is not in the network")
            if not (value > 0 and math.isfinite(value)):
                report.errors.append(f"{role} at {label!r} must be positive and finite, got {value!r}")
    both = sorted(set(problem.supplies) & set(problem.demands))
    if both:
        report.errors.append(f"nodes are both source and sink: {', '.join(both)}")
    if not problem.supplies:
        report.errors.append("no source nodes")
    if not problem.demands:
        report.errors.append("no sink nodes")

    s, d = problem.total_supply, problem.total_demand
    if math.isfinite(s) and math.isfinite(d) and abs(s - d) > BALANCE_RTOL * max(abs(s), abs(d)):
        report.errors.append(f"imbalance: total supply {s:g} != total demand {d:g}")

    if report.errors:
        return report

    reach = net.reachable_from(problem.supplies)
    for sink in problem.demands:
        if sink not in reach:
            report.warnings.append(f"sink {sink!r} is unreachable from every source")
    for source in problem.supplies:
        if not (net.reachable_from([source]) & set(problem.demands)):
            report.warnings.append(f"source {source!r} reaches no sink")
    return report
