"""Simulation and numerics for the p-frozen Erdos-Renyi random graph."""

__version__ = "0.1.0"

from .errors import DomainError, NumericalError

__all__ = ["DomainError", "NumericalError", "__version__"]
