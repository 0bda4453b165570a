"""Numerical lab for degenerate Ginzburg-Landau energies."""

__version__ = "0.1.0"

from .errors import LabError
from .potential import EnergyParams, Potential, model_potential

__all__ = [
    "__version__",
    "EnergyParams",
    "LabError",
    "Potential",
    "model_potential",
]
