"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class DroVarError(Exception):
    exit_code = 1


class InputError(DroVarError, ValueError):
    """Non-finite or otherwise invalid numeric input."""

    exit_code = 4


class ConfigError(DroVarError, ValueError):
    exit_code = 4


class DataIOError(DroVarError, OSError):
    exit_code = 2


class ParseError(DroVarError, ValueError):
    exit_code = 3

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SolverError(DroVarError, RuntimeError):
    exit_code = 5


class LineSearchError(SolverError):
    """Armijo backtracking exhausted its budget.

    The last accepted iterate and the objective trace up to that point are
    attached so callers can still use (or report) the stalled point.
    """

    def __init__(self, message, theta, objective_trace, iterations):
        super().__init__(message)
        self.theta = theta
        self.objective_trace = objective_trace
        self.iterations = iterations
