"""Exact minimum-cost flow by successive shortest paths.

Used to check the Physarum integrator.  When every cost, supply and demand
is a decimal with at most six fractional digits the computation runs on
scaled Python integers and is exact; otherwise it falls back to floats.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Optional

import numpy as np

from .dynamics import FlowSolution, conservation_residuals, solution_from_flux
from .errors import DimensionMismatch
from .network import FlowProblem, Network

MAX_DECIMALS = 6
FLOAT_TOL = 1e-9
CONSERVATION_RTOL = 1e-3


@dataclass
class ExactSolution:
    flux: np.ndarray
    optimal_cost: float
    feasible: bool
    potentials: Optional[np.ndarray] = None
    """Node duals with ``cost + pi[tail] - pi[head] >= 0`` on every edge and
    equality on every edge that ships; ``None`` when infeasible."""

    def as_flow_solution(self, network: Network) -> FlowSolution:
        return solution_from_flux(network, self.flux, prune_threshold=0.0)


def _decimals(x: float) -> Optional[int]:
    try:
        exp = Decimal(repr(float(x))).normalize().as_tuple().exponent
    except InvalidOperation:
        return None
    if not isinstance(exp, int):
        return None
    return max(0, -exp)


def _exact_scale(values) -> Optional[int]:
    places = 0
    for v in values:
        d = _decimals(v)
        if d is None or d > MAX_DECIMALS:
            return None
        places = max(places, d)
    return 10**places


class _Residual:
    """Residual graph with a super source ``S`` and super sink ``T``."""

    def __init__(self, n):
        self.head: list[int] = []
        self.cap: list = []
        self.cost: list = []
        self.out: list[list[int]] = [[] for _ in range(n)]

    def add(self, u, v, cap, cost):
        k = len(self.head)
        self.head += [v, u]
        self.cap += [cap, 0]
        self.cost += [cost, -cost]
        self.out[u].append(k)
        self.out[v].append(k + 1)
        return k


def _ssp(n, arcs, supply, demand, inf, zero, eps):
    """Core loop. ``arcs`` are (u, v, cost); returns (arc flows, shipped)."""
    S, T = n, n + 1
    g = _Residual(n + 2)
    arc_ids = [g.add(u, v, inf, c) for u, v, c in arcs]
    for i in range(n):
        if supply[i] > zero:
            g.add(S, i, supply[i], zero)
        if demand[i] > zero:
            g.add(i, T, demand[i], zero)
    need = sum(supply)
    pot = [zero] * (n + 2)
    shipped = zero
    while need - shipped > eps:
        dist: list = [None] * (n + 2)
        prev = [-1] * (n + 2)
        dist[S] = zero
        heap = [(zero, S)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for k in g.out[u]:
                if g.cap[k] <= eps:
                    continue
                v = g.head[k]
                # reduced costs are >= 0 in exact arithmetic; clamping stops
                # float rounding from creating a negative cycle
                nd = d + max(g.cost[k] + pot[u] - pot[v], zero)
                if dist[v] is None or nd < dist[v]:
                    dist[v] = nd
                    prev[v] = k
                    heapq.heappush(heap, (nd, v))
        if dist[T] is None:
            break
        for v in range(n + 2):
            if dist[v] is not None:
                pot[v] += dist[v]
            else:
                pot[v] += dist[T]
        push = need - shipped
        v = T
        while v != S:
            k = prev[v]
            push = min(push, g.cap[k])
            v = g.head[k ^ 1]
        v = T
        while v != S:
            k = prev[v]
            g.cap[k] -= push
            g.cap[k ^ 1] += push
            v = g.head[k ^ 1]
        shipped += push
    flows = [g.cap[k ^ 1] for k in arc_ids]
    return flows, shipped


def _certificate(n, arcs, flows, eps):
    """Bellman-Ford duals on the final residual graph (original nodes only)."""
    residual = []
    for (u, v, c), f in zip(arcs, flows):
        residual.append((u, v, c))
        if f > eps:
            residual.append((v, u, -c))
    pi = [0.0] * n
    for _ in range(n):
        changed = False
        for u, v, c in residual:
            if pi[u] + c < pi[v] - 1e-12:
                pi[v] = pi[u] + c
                changed = True
        if not changed:
            break
    # pi[v] <= pi[u] + c on every residual arc, so reduced costs are >= 0
    return np.array(pi)


def solve_exact(problem: FlowProblem) -> ExactSolution:
    """Minimum-cost feasible flow, or ``feasible=False`` if some demand is unreachable."""
    net = problem.network
    n = net.n_nodes
    supply = problem.supply_vector()
    demand = problem.demand_vector()
    values = list(net.costs) + list(supply) + list(demand)
    scale = _exact_scale(values)

    if scale is not None:
        to_int = lambda x: int(Decimal(repr(float(x))) * scale)  # noqa: E731
        arcs = [(int(u), int(v), to_int(c)) for u, v, c in zip(net.tails, net.heads, net.costs)]
        sup = [to_int(x) for x in supply]
        dem = [to_int(x) for x in demand]
        inf = sum(sup) + 1
        flows, shipped = _ssp(n, arcs, sup, dem, inf, 0, 0)
        feasible = shipped == sum(sup)
        flux = np.array([f / scale for f in flows], dtype=float)
        exact_cost = sum(f * c for f, (_, _, c) in zip(flows, arcs))
        cost = exact_cost / (scale * scale)
        cert_arcs = [(u, v, c / scale) for u, v, c in arcs]
    else:
        arcs = [(int(u), int(v), float(c)) for u, v, c in zip(net.tails, net.heads, net.costs)]
        sup, dem = [float(x) for x in supply], [float(x) for x in demand]
        need = math.fsum(sup)
        tol = FLOAT_TOL * max(1.0, need)
        flows, shipped = _ssp(n, arcs, sup, dem, need * 2 + 1, 0.0, tol)
        feasible = need - shipped <= tol
        flux = np.array(flows, dtype=float)
        cost = float(np.dot(flux, net.costs))
        cert_arcs = arcs

    if not feasible:
        return ExactSolution(flux=flux, optimal_cost=math.inf, feasible=False)
    potentials = _certificate(n, cert_arcs, flux, 0.0)
    return ExactSolution(flux=flux, optimal_cost=float(cost), feasible=True, potentials=potentials)


def shortest_path(network: Network, source: str, target: str) -> Optional[list[str]]:
    """Label-correcting (FIFO Bellman-Ford) shortest path; ``None`` if unreachable."""
    s, t = network.index[source], network.index[target]
    dist = [math.inf] * network.n_nodes
    pred = [-1] * network.n_nodes
    dist[s] = 0.0
    queue = deque([s])
    queued = {s}
    while queue:
        u = queue.popleft()
        queued.discard(u)
        for k, sign in network.adjacency[u]:
            if sign < 0:
                continue
            v = int(network.heads[k])
            nd = dist[u] + float(network.costs[k])
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                if v not in queued:
                    queue.append(v)
                    queued.add(v)
    if math.isinf(dist[t]):
        return None
    path = [t]
    while path[-1] != s:
        path.append(pred[path[-1]])
    return [network.nodes[i] for i in reversed(path)]


@dataclass
class VerificationReport:
    physarum_cost: float
    oracle_cost: float
    relative_gap: float
    oracle_feasible: bool
    tolerance: float
    conservation_violations: list[tuple[str, float]] = field(default_factory=list)
    support_comparison: list[tuple[str, str, str]] = field(default_factory=list)
    """``(tail, head, who)`` where ``who`` names the only side that ships."""

    @property
    def passed(self) -> bool:
        return (
            self.oracle_feasible
            and self.relative_gap <= self.tolerance
            and not self.conservation_violations
        )

    def to_text(self) -> str:
        lines = [
            f"oracle_feasible,{str(self.oracle_feasible).lower()}",
            f"physarum_cost,{self.physarum_cost:.9g}",
            f"oracle_cost,{self.oracle_cost:.9g}",
            f"relative_gap,{self.relative_gap:.6g}",
            f"tolerance,{self.tolerance:.6g}",
            f"conservation_violations,{len(self.conservation_violations)}",
        ]
        lines += [f"  residual,{node},{r:.6g}" for node, r in self.conservation_violations]
        lines.append(f"support_differences,{len(self.support_comparison)}")
        lines += [f"  only_{who},{a},{b}" for a, b, who in self.support_comparison]
        lines.append(f"passed,{str(self.passed).lower()}")
        return "\n".join(lines) + "\n"


def verify(physarum: FlowSolution, problem: FlowProblem, tolerance: float = 0.02) -> VerificationReport:
    """Compare a solution against the exact optimum of ``problem``."""
    net = problem.network
    flux = np.asarray(physarum.flux, dtype=float)
    if flux.shape != (net.n_edges,) or physarum.network.n_edges != net.n_edges:
        raise DimensionMismatch(
            f"solution has {flux.size} edges, problem has {net.n_edges}"
        )
    exact = solve_exact(problem)
    oracle_cost = exact.optimal_cost
    if exact.feasible:
        gap = (physarum.total_cost - oracle_cost) / max(oracle_cost, 1.0)
    else:
        gap = math.nan

    res = conservation_residuals(flux, problem)
    limit = CONSERVATION_RTOL * float(flux.max(initial=0.0))
    violations = [(net.nodes[i], float(r)) for i, r in enumerate(res) if abs(r) > limit]

    ours = set(physarum.active_edges)
    theirs = {int(k) for k in np.flatnonzero(exact.flux > 0)}
    support = []
    for k in sorted(ours ^ theirs):
        e = net.edges[k]
        support.append((e.tail, e.head, "physarum" if k in ours else "oracle"))

    return VerificationReport(
        physarum_cost=physarum.total_cost,
        oracle_cost=oracle_cost,
        relative_gap=gap,
        oracle_feasible=exact.feasible,
        tolerance=tolerance,
        conservation_violations=violations,
        support_comparison=support,
    )
