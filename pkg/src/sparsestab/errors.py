"""Exception hierarchy shared by the library and the command line."""


class SparsestabError(Exception):
    exit_code = 1


class ValidationError(SparsestabError, ValueError):
    """Bad input: malformed file, violated invariant, wrong dimensions."""
    exit_code = 2


class NumericalError(SparsestabError, ArithmeticError):
    """Model-level numerical failure (non-convergence, singular matrices)."""
    exit_code = 3


class SolverError(SparsestabError):
    """The conic solver failed or returned an inconsistent verdict."""
    exit_code = 4

    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


class SimulationError(SparsestabError):
    """Raised in strict mode when simulated paths were truncated."""
    exit_code = 5
