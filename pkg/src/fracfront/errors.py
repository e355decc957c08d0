"""Exception hierarchy shared by the solver modules."""


class FrontError(Exception):
    """Base class for all package errors."""


class DomainError(FrontError, ValueError):
    """An argument lies outside the admissible range."""


class ContractError(FrontError, ValueError):
    """Inputs violate a structural precondition (grids, tails, parameter ordering)."""


class SolverError(FrontError):
    """The linear system is singular or too ill-conditioned to trust."""


class IterationError(FrontError):
    """The monotone iteration did not reach tolerance; carries the trace."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


class InvariantViolation(FrontError):
    """An iterate left the sub/super-solution sandwich or lost monotonicity."""


class BracketError(FrontError):
    """No sign change was found for a one-dimensional root search."""

    def __init__(self, msg, table=None):
        super().__init__(msg)
        self.table = table


class OrderingError(FrontError):
    """Speeds of an ordered family of nonlinearities came out unordered."""

    def __init__(self, msg, worst_pair=None):
        super().__init__(msg)
        self.worst_pair = worst_pair


class ContinuationError(FrontError):
    """An epsilon-continuation stage could not be normalized."""

    def __init__(self, msg, epsilon=None, mu=None, stages=None):
        super().__init__(msg)
        self.epsilon = epsilon
        self.mu = mu
        self.stages = stages or []


class WindowError(FrontError):
    """Too few grid points fall inside a fitting window."""
