"""Command-line interface.

Exit codes: 0 success, 1 input or usage error, 2 solver did not converge.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dynamics import SolverConfig, solve, warm_restart
from .errors import NotConverged, PhysarumError, UnknownEdge
from .ingest import PARSERS, load_problem, write_solution, write_trace
from .oracle import solve_exact, verify

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _edge_change(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected FROM,TO,COST, got {text!r}")
    try:
        cost = float(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad cost in {text!r}") from None
    return parts[0], parts[1], cost


def build_parser() -> argparse.ArgumentParser:
    defaults = SolverConfig()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", type=Path)
    common.add_argument("--format", choices=sorted(PARSERS), help="default: from file extension")
    common.add_argument("--dt", type=float, default=defaults.dt)
    common.add_argument("--init-conductivity", type=float, default=defaults.init_conductivity)
    common.add_argument("--eps", type=float, default=defaults.convergence_eps)
    common.add_argument("--prune-threshold", type=float, default=defaults.prune_threshold)
    common.add_argument("--max-iters", type=int, default=defaults.max_iterations)
    common.add_argument("--signed-flux", action="store_true", help="do not clamp reverse flux")
    common.add_argument("--trace", type=Path, help="write the conductivity trace CSV here")

    parser = _Parser(prog="physarum-mcf", description="Physarum solver for min-cost transshipment problems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="solve and print the shipment plan")
    p_verify = sub.add_parser("verify", parents=[common], help="compare against the exact optimum")
    p_verify.add_argument("--tolerance", type=float, default=0.02)
    p_perturb = sub.add_parser("perturb", parents=[common], help="re-cost edges, warm vs cold restart")
    p_perturb.add_argument(
        "--set", dest="changes", action="append", type=_edge_change, default=[], metavar="FROM,TO,COST"
    )
    return parser


def _config(args) -> SolverConfig:
    return SolverConfig(
        dt=args.dt,
        init_conductivity=args.init_conductivity,
        convergence_eps=args.eps,
        prune_threshold=args.prune_threshold,
        max_iterations=args.max_iters,
        signed_flux=args.signed_flux,
    )


def _solve(problem, config, trace_path):
    records = [] if trace_path else None
    try:
        solution = solve(problem, config, trace=records.append if records is not None else None)
        status = EXIT_OK
    except NotConverged as exc:
        solution, status = exc.solution, EXIT_NOT_CONVERGED
        print(f"warning: {exc}", file=sys.stderr)
    if trace_path:
        trace_path.write_text(write_trace(records, problem.network), encoding="ascii")
    return solution, status


def cmd_solve(args, out) -> int:
    problem = load_problem(args.input, args.format)
    solution, status = _solve(problem, _config(args), args.trace)
    out.write(write_solution(solution))
    return status


def cmd_verify(args, out) -> int:
    problem = load_problem(args.input, args.format)
    solution, status = _solve(problem, _config(args), args.trace)
    report = verify(solution, problem, args.tolerance)
    out.write(f"converged,{str(solution.converged).lower()}\n")
    out.write(f"iterations,{solution.iterations}\n")
    out.write(report.to_text())
    if not report.oracle_feasible or not report.passed:
        return EXIT_INPUT
    return status


def cmd_perturb(args, out) -> int:
    problem = load_problem(args.input, args.format)
    net = problem.network
    changes = {}
    for tail, head, cost in args.changes:
        if not net.has_edge(tail, head):
            raise UnknownEdge(f"no edge {tail}->{head}")
        changes[(tail, head)] = cost
    config = _config(args)
    perturbed = problem.with_costs(changes)

    base, s0 = _solve(problem, config, None)
    cold, s1 = _solve(perturbed, config, None)
    try:
        warm, s2 = warm_restart(base, perturbed, config), EXIT_OK
    except NotConverged as exc:
        warm, s2 = exc.solution, EXIT_NOT_CONVERGED
    exact = solve_exact(perturbed)

    rows = [
        ("base", base),
        ("cold", cold),
        ("warm", warm),
    ]
    out.write("run,total_cost,iterations,converged\n")
    for name, sol in rows:
        out.write(f"{name},{sol.total_cost:.9g},{sol.iterations},{str(sol.converged).lower()}\n")
    oracle = f"{exact.optimal_cost:.9g}" if exact.feasible else "infeasible"
    out.write(f"oracle,{oracle}\n")
    for (tail, head), cost in changes.items():
        out.write(f"changed,{tail},{head},{cost:.9g}\n")
    return max(s0, s1, s2)


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "perturb": cmd_perturb}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out)
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (PhysarumError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
