"""Exception hierarchy shared across the package."""


class PhysarumError(Exception):
    """Base class for every error raised by this package."""


class NetworkError(PhysarumError, ValueError):
    """Invalid network construction input."""


class DuplicateNode(NetworkError):
    pass


class DuplicateEdge(NetworkError):
    pass


class NonPositiveCost(NetworkError):
    pass


class SelfLoop(NetworkError):
    pass


class UnknownEndpoint(NetworkError):
    pass


class InvalidProblem(PhysarumError, ValueError):
    """A flow problem failed validation; ``report`` holds the diagnostics."""

    def __init__(self, report):
        self.report = report
        super().__init__("; ".join(report.errors) or "invalid problem")


class DimensionMismatch(PhysarumError, ValueError):
    pass


class ParseError(PhysarumError, ValueError):
    """Malformed input text. ``line`` and ``column`` are 1-based."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        self.message = message
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class ImbalanceError(ParseError):
    pass


class UnsupportedCapacity(ParseError):
    pass


class NonZeroLowerBound(ParseError):
    pass


class NonFiniteState(PhysarumError, ArithmeticError):
    """The integrator produced NaN/inf or negative particle counts."""


class NotConverged(PhysarumError):
    """Iteration budget exhausted. The partial result is in ``solution``."""

    def __init__(self, solution):
        self.solution = solution
        super().__init__(
            f"not converged after {solution.iterations} iterations "
            f"(last delta {solution.residual_delta:.3g})"
        )


class TopologyMismatch(PhysarumError, ValueError):
    pass


class UnknownEdge(PhysarumError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown edge"
