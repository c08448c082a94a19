"""Exception hierarchy shared by all modules."""


class OPWSError(Exception):
    """Base class for library errors."""


class GridError(OPWSError, ValueError):
    """Sample grids are incompatible (step does not divide, origin misaligned, ...)."""


class DomainCoverageError(OPWSError, ValueError):
    """A sampled signal does not cover the interval an operation needs."""


class PreconditionError(OPWSError, ValueError):
    """Inputs violate a hypothesis of the method (e.g. T*Omega >= 1)."""


class BudgetExceededError(OPWSError):
    """An exhaustive enumeration would exceed the configured budget."""


class UnderdeterminedError(OPWSError, ValueError):
    """More unknowns than equations."""


class SingularSystemError(OPWSError):
    """A linear system is singular or its condition number exceeds the cap."""

    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition


class InfeasibleCoverError(OPWSError):
    """No (K, L, eps) in the search range rectifies the support set."""


class ConfigError(OPWSError, ValueError):
    """Experiment configuration failed validation."""
