"""Numerical p-modules of curve families and separating sets.

Submodules: ``numerics`` (quadrature, ODE, gamma), ``core`` (densities,
curves, admissibility and extremality checks), ``planar`` (quadrilaterals and
rings in the plane), ``euclidean`` (condensers in R^n), ``carnot`` (ring
condensers in Carnot groups), ``oracle`` (discrete grid solver) and ``cli``.
"""

from . import carnot, core, euclidean, numerics, oracle, planar
from .core import DensityField, ModuleEstimate, Polyline

__all__ = ["carnot", "core", "euclidean", "numerics", "oracle", "planar",
           "DensityField", "ModuleEstimate", "Polyline"]
__version__ = "0.1.0"
