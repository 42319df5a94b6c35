"""Reference and seeded random problem instances."""

from __future__ import annotations

import heapq
import math
from importlib import resources

import numpy as np

from .network import FlowProblem, build_network

PLANTS = ("P1", "P2")
WAREHOUSES = ("W1", "W2", "W3")
CUSTOMERS = ("C1", "C2", "C3", "C4")

# plant -> warehouse unit costs, indexed [plant][warehouse]
PLANT_WAREHOUSE_COST = (
    (1, 2, 100),
    (3, 1, 2),
)
# warehouse -> customer unit costs, indexed [warehouse][customer]
WAREHOUSE_CUSTOMER_COST = (
    (5, 7, 100, 100),
    (9, 6, 7, 100),
    (100, 6, 7, 4),
)
PLANT_SUPPLY = {"P1": 9.0, "P2": 8.0}
CUSTOMER_DEMAND = {"C1": 3.0, "C2": 5.0, "C3": 4.0, "C4": 5.0}
BIG_M = 100.0
REFERENCE_OPTIMUM = 121.0

# A known optimal (fractional) plan for the three-level instance.
REFERENCE_PLAN = {
    ("P1", "W1"): 5.5,
    ("P1", "W2"): 3.5,
    ("P2", "W2"): 3.0,
    ("P2", "W3"): 5.0,
    ("W1", "C1"): 3.0,
    ("W1", "C2"): 2.5,
    ("W2", "C2"): 2.5,
    ("W2", "C3"): 4.0,
    ("W3", "C4"): 5.0,
}


def three_level_problem() -> FlowProblem:
    """Two plants, three warehouses, four customers; 18 directed edges."""
    edges = []
    for p, row in zip(PLANTS, PLANT_WAREHOUSE_COST):
        edges += [(p, w, c) for w, c in zip(WAREHOUSES, row)]
    for w, row in zip(WAREHOUSES, WAREHOUSE_CUSTOMER_COST):
        edges += [(w, c, cost) for c, cost in zip(CUSTOMERS, row)]
    net = build_network(PLANTS + WAREHOUSES + CUSTOMERS, edges)
    return FlowProblem(net, PLANT_SUPPLY, CUSTOMER_DEMAND)


def data_path(name: str):
    return resources.files(__package__).joinpath("data", name)


def data_text(name: str) -> str:
    return data_path(name).read_text(encoding="ascii")


def _random_graph(rng, max_nodes=10, max_edges=25, cost_range=(1, 10)):
    """Strongly connected digraph: a random Hamiltonian cycle plus extra edges."""
    n = int(rng.integers(4, max_nodes + 1))
    order = rng.permutation(n)
    edges = {}
    lo, hi = cost_range
    for i in range(n):
        edges[(int(order[i]), int(order[(i + 1) % n]))] = int(rng.integers(lo, hi + 1))
    target = int(rng.integers(n, min(max_edges, n * (n - 1)) + 1))
    while len(edges) < target:
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u != v and (u, v) not in edges:
            edges[(u, v)] = int(rng.integers(lo, hi + 1))
    return n, edges


def _split(rng, total, parts):
    """Random composition of ``total`` into ``parts`` positive integers."""
    if parts == 1:
        return [total]
    cuts = np.sort(rng.choice(np.arange(1, total), size=parts - 1, replace=False))
    return [int(x) for x in np.diff(np.concatenate([[0], cuts, [total]]))]


def _labels(n):
    return [f"v{i}" for i in range(n)]


def random_problem(
    seed: int, max_nodes: int = 10, max_edges: int = 25, max_total: int = 10, rate_unit: int = 10
) -> FlowProblem:
    """Balanced instance on a strongly connected graph with integer costs 1..10.

    One to three sources and one to three sinks.  Rates are multiples of
    ``rate_unit`` with total supply at most ``max_total * rate_unit``.  At
    unit scale the injected particles need longer to build potential across
    a route costing tens than idle conductivities take to decay to the prune
    threshold, so the default keeps rates comparable to the route costs.
    """
    rng = np.random.default_rng(seed)
    n, edges = _random_graph(rng, max_nodes, max_edges)
    n_src = int(rng.integers(1, 4))
    n_snk = int(rng.integers(1, 4))
    while n_src + n_snk > n:
        n_snk -= 1
    roles = [int(x) for x in rng.permutation(n)[: n_src + n_snk]]
    total = int(rng.integers(max(n_src, n_snk), max_total + 1))
    labels = _labels(n)
    supplies = {labels[i]: v * rate_unit for i, v in zip(roles[:n_src], _split(rng, total, n_src))}
    demands = {labels[i]: v * rate_unit for i, v in zip(roles[n_src:], _split(rng, total, n_snk))}
    net = build_network(labels, [(labels[u], labels[v], c) for (u, v), c in edges.items()])
    return FlowProblem(net, supplies, demands)


def _count_shortest_paths(n, edges, s, t):
    adj = [[] for _ in range(n)]
    for (u, v), c in edges.items():
        adj[u].append((v, c))
    dist = [math.inf] * n
    dist[s] = 0
    heap = [(0, s)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, c in adj[u]:
            if d + c < dist[v]:
                dist[v] = d + c
                heapq.heappush(heap, (d + c, v))
    # positive costs make the tight-edge subgraph acyclic; count in distance order
    count = [0] * n
    count[s] = 1
    for u in sorted(range(n), key=lambda i: dist[i]):
        if math.isinf(dist[u]):
            continue
        for v, c in adj[u]:
            if dist[u] + c == dist[v]:
                count[v] += count[u]
    return count[t]


def random_shortest_path_problem(seed: int, rate: float = 30.0, max_nodes: int = 10, max_edges: int = 25):
    """Single source, single sink instance whose cheapest route is unique.

    Candidate graphs and terminal pairs are redrawn until exactly one
    minimum-cost path exists.  Returns ``(problem, source, sink)``.
    """
    rng = np.random.default_rng(seed)
    while True:
        n, edges = _random_graph(rng, max_nodes, max_edges)
        s, t = (int(x) for x in rng.choice(n, size=2, replace=False))
        if _count_shortest_paths(n, edges, s, t) == 1:
            break
    labels = _labels(n)
    net = build_network(labels, [(labels[u], labels[v], c) for (u, v), c in edges.items()])
    return FlowProblem(net, {labels[s]: rate}, {labels[t]: rate}), labels[s], labels[t]
