"""Exception types shared by the solvers."""


class ContractError(ValueError):
    """An input violates a documented precondition."""


class SolverError(RuntimeError):
    """A numerical procedure failed.

    ``history`` holds whatever residual sequence the failing routine had
    accumulated, so callers can dump it for inspection.
    """

    def __init__(self, message, history=None, step=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
        self.step = step


class ConvergenceError(SolverError):
    """An iteration (CG, Picard, continuation) did not reach its tolerance."""
