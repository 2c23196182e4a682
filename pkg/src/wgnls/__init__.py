"""Cubic NLS on the cylinder R x T: spectral tools, the resonant and Szegő
flows, the full flow by splitting, and scattering and cascade experiments."""
from .spectral import (CylinderField, CylinderGrid, TorusField, build_grid, free_evolve,
                       project, transform)
from .trajectory import IntegrationError, Trajectory

__all__ = ["CylinderField", "CylinderGrid", "TorusField", "build_grid", "free_evolve",
           "project", "transform", "IntegrationError", "Trajectory"]
__version__ = "0.1.0"
