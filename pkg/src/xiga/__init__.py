"""
Immersed multi-material isogeometric analysis in two dimensions.

Heat conduction and plane-strain elasticity on a tensor-product B-spline
background grid, with geometry given by level sets, generalized Heaviside
enrichment, Nitsche coupling and face-oriented ghost stabilization.
"""
from .errors import ConfigurationError, SolverError
from .geometry import Circle, LevelSetField, Material, MaterialTable, PhaseMap, Plane, RotatedBox
from .problem import BoundaryCondition, Problem, Solution
from .splines import KnotVector, TensorBSplineBasis
from .weakform import PenaltyConfig

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition", "Circle", "ConfigurationError", "KnotVector", "LevelSetField",
    "Material", "MaterialTable", "PenaltyConfig", "PhaseMap", "Plane", "Problem",
    "RotatedBox", "Solution", "SolverError", "TensorBSplineBasis",
]
