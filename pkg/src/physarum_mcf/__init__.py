"""Physarum-inspired particle-potential solver for transshipment problems."""

from .dynamics import (
    FlowSolution,
    SolverConfig,
    SolverState,
    TraceRecord,
    compute_flux,
    conservation_residuals,
    converged,
    solve,
    solution_from_flux,
    step,
    total_cost,
    update_conductivity,
    warm_restart,
)
from .network import Edge, FlowProblem, Network, ValidationReport, build_network, validate_problem
from .oracle import ExactSolution, VerificationReport, shortest_path, solve_exact, verify

__all__ = [
    "Edge",
    "ExactSolution",
    "FlowProblem",
    "FlowSolution",
    "Network",
    "SolverConfig",
    "SolverState",
    "TraceRecord",
    "ValidationReport",
    "VerificationReport",
    "build_network",
    "compute_flux",
    "conservation_residuals",
    "converged",
    "shortest_path",
    "solution_from_flux",
    "solve",
    "solve_exact",
    "step",
    "total_cost",
    "update_conductivity",
    "validate_problem",
    "verify",
    "warm_restart",
]
