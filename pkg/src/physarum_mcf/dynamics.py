"""Particle-potential Physarum integrator for transshipment problems.

Each iteration runs, in this order:

1. inject ``supply * dt`` particles at every source;
2. extract ``min(particles, demand * dt)`` at every sink;
3. flux ``Q = D * (phi_tail - phi_head) / L``, clamped at zero on directed edges;
4. semi-implicit conductivity update ``D <- (D + dt * Q) / (1 + dt)``;
5. move ``Q * dt`` particles along every edge;
6. prune edges whose conductivity fell below ``prune_threshold``.

The step change ``sum |D_new - D_old|`` is measured before pruning and drives
termination.  Per-iteration work is O(edges + nodes); no linear system is
solved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import InvalidProblem, NonFiniteState, NotConverged, TopologyMismatch
from .network import FlowProblem, Network, validate_problem

# Negative particle counts down to this (relative) size are rounding noise.
_NEG_PARTICLE_RTOL = 1e-12

# Conductivities are carried in extended precision where the platform has it
# (80-bit x87 on x86-64 Linux); long decay runs then stay within an ulp of
# the closed form once rounded back to float64.
CONDUCTIVITY_DTYPE = np.longdouble


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 0.01
    init_conductivity: float = 1.0
    convergence_eps: float = 1e-4
    prune_threshold: float = 1e-6
    max_iterations: int = 1_000_000
    signed_flux: bool = False

    def __post_init__(self):
        if not 0 < self.dt < 1:
            raise ValueError(f"dt must lie in (0, 1), got {self.dt}")
        if not self.init_conductivity > 0:
            raise ValueError("init_conductivity must be positive")
        if not self.convergence_eps > 0:
            raise ValueError("convergence_eps must be positive")
        if not self.prune_threshold > 0:
            raise ValueError("prune_threshold must be positive")
        if not self.prune_threshold < self.init_conductivity:
            raise ValueError("prune_threshold must be below init_conductivity")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")


@dataclass
class SolverState:
    """Mutable integrator state.

    ``alive`` is False for pruned edges; their conductivity and flux stay
    exactly zero.  ``last_delta`` is ``inf`` until the first step completes.
    ``conductivity`` has dtype :data:`CONDUCTIVITY_DTYPE`.
    """

    conductivity: np.ndarray
    flux: np.ndarray
    particles: np.ndarray
    alive: np.ndarray
    iteration: int = 0
    last_delta: float = math.inf

    @classmethod
    def initial(cls, network: Network, config: SolverConfig) -> "SolverState":
        m, n = network.n_edges, network.n_nodes
        return cls(
            conductivity=np.full(m, config.init_conductivity, dtype=CONDUCTIVITY_DTYPE),
            flux=np.zeros(m),
            particles=np.zeros(n),
            alive=np.ones(m, dtype=bool),
        )

    def copy(self) -> "SolverState":
        return replace(
            self,
            conductivity=self.conductivity.copy(),
            flux=self.flux.copy(),
            particles=self.particles.copy(),
            alive=self.alive.copy(),
        )


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    time: float
    conductivities: np.ndarray


@dataclass
class FlowSolution:
    """Final shipment plan.

    ``active_edges`` are the edge indices with flux above the prune threshold;
    ``total_cost`` sums flux times cost over them only, and the remainder is
    reported as ``dust_cost``.
    """

    network: Network
    flux: np.ndarray
    total_cost: float
    converged: bool
    iterations: int
    residual_delta: float
    active_edges: tuple[int, ...]
    dust_cost: float = 0.0
    state: Optional[SolverState] = field(default=None, repr=False)

    def flux_by_edge(self) -> dict[tuple[str, str], float]:
        return {(e.tail, e.head): float(q) for e, q in zip(self.network.edges, self.flux)}

    def active_pairs(self) -> list[tuple[str, str]]:
        edges = self.network.edges
        return [(edges[k].tail, edges[k].head) for k in self.active_edges]


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteState("non-finite value in solver state")


def compute_flux(state: SolverState, network: Network, signed: bool = False) -> np.ndarray:
    """Per-edge flux from conductivities and node potentials.

    Negative raw flux is clamped to zero because edges are one-way, unless
    ``signed`` is set, in which case the raw signed value is returned.
    """
    _check_finite(state.conductivity, state.particles)
    phi = state.particles
    d = np.asarray(state.conductivity, dtype=float)
    q = d * (phi[network.tails] - phi[network.heads]) / network.costs
    if not signed:
        np.maximum(q, 0.0, out=q)
    q[~state.alive] = 0.0
    return q


def update_conductivity(conductivity, flux, dt: float) -> np.ndarray:
    """Closed form of ``(D_new - D) / dt = Q - D_new``.

    Edges already at equilibrium (``Q == D``) are returned bit-for-bit.  The
    result has dtype :data:`CONDUCTIVITY_DTYPE`; the decay factor is the
    float64 value of ``1 + dt``.
    """
    d = np.asarray(conductivity, dtype=CONDUCTIVITY_DTYPE)
    q = np.asarray(flux, dtype=CONDUCTIVITY_DTYPE)
    den = CONDUCTIVITY_DTYPE(1.0 + float(dt))
    return np.where(q == d, d, (d + CONDUCTIVITY_DTYPE(dt) * q) / den)


def _advance(state: SolverState, problem_vectors, network: Network, config: SolverConfig) -> None:
    """One iteration, in place."""
    supply, demand = problem_vectors
    dt = config.dt
    phi = state.particles

    phi += supply * dt
    phi -= np.minimum(phi, demand * dt)

    q = compute_flux(state, network, signed=config.signed_flux)
    drive = np.abs(q) if config.signed_flux else q
    new_d = update_conductivity(state.conductivity, drive, dt)

    moved = q * dt
    phi += np.bincount(network.heads, moved, minlength=network.n_nodes)
    phi -= np.bincount(network.tails, moved, minlength=network.n_nodes)

    delta = float(np.abs(new_d - state.conductivity).sum())
    if not math.isfinite(delta):
        raise NonFiniteState(f"conductivity diverged at iteration {state.iteration + 1}")
    low = phi.min(initial=0.0)
    if low < 0:
        scale = max(1.0, float(phi.max(initial=0.0)))
        if low < -_NEG_PARTICLE_RTOL * scale:
            raise NonFiniteState(
                f"negative particle count {low:.3g} at iteration {state.iteration + 1}; dt too large"
            )
        np.maximum(phi, 0.0, out=phi)

    dead = new_d < config.prune_threshold
    state.alive &= ~dead
    new_d[~state.alive] = 0.0
    q[~state.alive] = 0.0

    state.conductivity = new_d
    state.flux = q
    state.iteration += 1
    state.last_delta = delta


def step(state: SolverState, problem: FlowProblem, config: SolverConfig) -> SolverState:
    """Return the state after one iteration; ``state`` is left untouched."""
    net = problem.network
    if state.conductivity.shape != (net.n_edges,) or state.particles.shape != (net.n_nodes,):
        raise ValueError("state dimensions do not match the problem's network")
    new = state.copy()
    _advance(new, (problem.supply_vector(), problem.demand_vector()), net, config)
    return new


def converged(state: SolverState, config: SolverConfig) -> bool:
    return state.iteration > 0 and state.last_delta <= config.convergence_eps


def total_cost(flux, network: Network) -> float:
    return float(np.dot(np.asarray(flux, dtype=float), network.costs))


def solution_from_flux(
    network: Network,
    flux,
    *,
    converged: bool = True,
    iterations: int = 0,
    residual_delta: float = 0.0,
    prune_threshold: float = SolverConfig.prune_threshold,
    state: Optional[SolverState] = None,
) -> FlowSolution:
    """Wrap a per-edge flux vector as a :class:`FlowSolution`."""
    flux = np.asarray(flux, dtype=float).copy()
    if flux.shape != (network.n_edges,):
        raise ValueError(f"expected {network.n_edges} flux values, got shape {flux.shape}")
    active = flux > prune_threshold
    contrib = flux * network.costs
    return FlowSolution(
        network=network,
        flux=flux,
        total_cost=float(contrib[active].sum()),
        converged=converged,
        iterations=iterations,
        residual_delta=residual_delta,
        active_edges=tuple(int(k) for k in np.flatnonzero(active)),
        dust_cost=float(np.abs(contrib[~active]).sum()),
        state=state,
    )


TraceSink = Callable[[TraceRecord], None]


def _run(problem: FlowProblem, config: SolverConfig, state: SolverState, trace: Optional[TraceSink]):
    report = validate_problem(problem)
    if not report.valid:
        raise InvalidProblem(report)
    net = problem.network
    vectors = (problem.supply_vector(), problem.demand_vector())
    budget = state.iteration + int(config.max_iterations)
    while state.iteration < budget:
        _advance(state, vectors, net, config)
        if trace is not None:
            trace(TraceRecord(state.iteration, state.iteration * config.dt, state.conductivity.copy()))
        if converged(state, config):
            break
    solution = solution_from_flux(
        net,
        state.flux,
        converged=converged(state, config),
        iterations=state.iteration,
        residual_delta=state.last_delta,
        prune_threshold=config.prune_threshold,
        state=state,
    )
    if not solution.converged:
        raise NotConverged(solution)
    return solution


def solve(
    problem: FlowProblem,
    config: SolverConfig = SolverConfig(),
    trace: Optional[TraceSink] = None,
) -> FlowSolution:
    """Integrate from uniform conductivity and empty nodes until converged.

    Raises :class:`NotConverged` (carrying the partial solution) when
    ``max_iterations`` is exhausted.
    """
    return _run(problem, config, SolverState.initial(problem.network, config), trace)


def warm_restart(
    previous: FlowSolution,
    new_problem: FlowProblem,
    config: SolverConfig = SolverConfig(),
    trace: Optional[TraceSink] = None,
) -> FlowSolution:
    """Continue from ``previous``'s conductivities and particles on a re-costed problem.

    Pruned edges are re-seeded at ``prune_threshold`` so they can regrow if
    the new costs favour them.  The iteration counter starts again at zero.
    """
    old, new = previous.network, new_problem.network
    if old.nodes != new.nodes or [(e.tail, e.head) for e in old.edges] != [
        (e.tail, e.head) for e in new.edges
    ]:
        raise TopologyMismatch("warm restart needs identical node and edge sets")
    if previous.state is None:
        raise ValueError("previous solution carries no solver state")
    prev = previous.state
    d = np.array(prev.conductivity, dtype=CONDUCTIVITY_DTYPE)
    d[d < config.prune_threshold] = config.prune_threshold
    state = SolverState(
        conductivity=d,
        flux=np.zeros(new.n_edges),
        particles=prev.particles.copy(),
        alive=np.ones(new.n_edges, dtype=bool),
    )
    return _run(new_problem, config, state, trace)


def conservation_residuals(flux, problem: FlowProblem) -> np.ndarray:
    """Per-node ``(outflow - inflow) - (supply - demand)``; zero for a feasible flow."""
    net = problem.network
    flux = np.asarray(flux, dtype=float)
    out = np.bincount(net.tails, flux, minlength=net.n_nodes)
    inn = np.bincount(net.heads, flux, minlength=net.n_nodes)
    return (out - inn) - (problem.supply_vector() - problem.demand_vector())
