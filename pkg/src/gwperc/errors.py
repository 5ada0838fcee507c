"""Exception types raised across the package."""


class GWPercError(Exception):
    """Base class for all package errors."""


class InvalidDistributionError(GWPercError, ValueError):
    pass


class SubcriticalError(GWPercError, ValueError):
    """Mean offspring number is not strictly greater than one."""


class MomentUnavailableError(GWPercError, ValueError):
    """A factorial moment or pgf derivative beyond the trusted order was requested."""

    def __init__(self, needed, available):
        self.needed = needed
        self.available = available
        super().__init__(
            f"moment of order {needed} requested, but only orders <= {available} are exact"
        )


class ResourceError(GWPercError, MemoryError):
    """Tree materialization exceeded the population cap."""

    def __init__(self, level, population, cap):
        self.level = level
        self.population = population
        self.cap = cap
        super().__init__(
            f"population cap {cap} exceeded at level {level} ({population} vertices)"
        )


class ConvergenceError(GWPercError, ArithmeticError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class CapError(GWPercError, ValueError):
    """Subset-statistic caps are too small for the requested quantity."""


class CombinatorialBudgetError(GWPercError, ValueError):
    pass
