"""Vertical minimal graphs in the Heisenberg space Nil3(tau).

Exact solution families, bounded and unbounded domains, a P1 finite element
solver with damped Newton, and experiment drivers for existence,
non-existence, barriers, exhaustion and growth.
"""
from .domain import BoundaryData, ComponentData, Domain2D, exhaust, is_convex
from .exact import CatenoidGraph, FmpSol, PlaneSol, VerticalCatenoidProfile, catenoid_height, integrate_daniel
from .fem import ScalarField, SolveReport, SolverOptions, newton_solve, refinement_study
from .geometry import IsometryNil, transform_graph
from .mesh import Mesh, triangulate
from .msq import Jet2, strong_residual

__all__ = [
    "BoundaryData", "CatenoidGraph", "ComponentData", "Domain2D", "FmpSol", "IsometryNil", "Jet2", "Mesh",
    "PlaneSol", "ScalarField", "SolveReport", "SolverOptions", "VerticalCatenoidProfile", "catenoid_height",
    "exhaust", "integrate_daniel", "is_convex", "newton_solve", "refinement_study", "strong_residual",
    "transform_graph", "triangulate",
]
__version__ = "0.1.0"
