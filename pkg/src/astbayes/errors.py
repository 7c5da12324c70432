"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the support or domain of an operation."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to reach its requested accuracy."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ChainError(RuntimeError):
    """An MCMC chain hit an invalid state; ``iteration`` is where it happened."""

    def __init__(self, message, iteration):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class DiagnosticsError(ValueError):
    """Convergence diagnostics cannot be computed for the given chains."""


class ReplicationError(RuntimeError):
    """A simulation-study replication failed; ``replication`` is its index."""

    def __init__(self, message, replication):
        super().__init__(f"{message} (replication {replication})")
        self.replication = replication


class InputError(ValueError):
    """Malformed input data; ``line`` is the 1-based line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
