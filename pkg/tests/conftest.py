import pytest

from physarum_mcf import SolverConfig, solve
from physarum_mcf.instances import three_level_problem


@pytest.fixture(scope="session")
def three_level():
    return three_level_problem()


@pytest.fixture(scope="session")
def three_level_run(three_level):
    """Default-config solve of the three-level instance, with its trace."""
    records = []
    solution = solve(three_level, SolverConfig(), trace=records.append)
    return solution, records


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
