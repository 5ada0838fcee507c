"""Bernoulli bond percolation on supercritical Galton-Watson trees."""
from .errors import (
    CapError,
    CombinatorialBudgetError,
    ConvergenceError,
    GWPercError,
    InvalidDistributionError,
    MomentUnavailableError,
    ResourceError,
    SubcriticalError,
)
from .offspring import OffspringDistribution

__version__ = "0.1.0"
