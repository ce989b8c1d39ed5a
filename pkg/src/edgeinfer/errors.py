"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Raised when an input violates a documented precondition."""


class InfeasiblePlacement(ValueError):
    """Raised when a dataset placement leaves some file stored nowhere."""


class SolveFailure(RuntimeError):
    """A numerical solve did not reach a usable answer (e.g. iteration cap)."""


class InconsistentRank(RuntimeError):
    """A low-rank factorization does not reproduce the matrix it came from."""


class ConfigError(ValueError):
    """Experiment configuration failed validation."""
