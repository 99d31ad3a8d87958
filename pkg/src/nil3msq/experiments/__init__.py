"""Experiment drivers built on the solver."""
from .barrier import Barrier, barrier_dominates, build_barrier, is_convex_point
from .bounded import InvariantViolation, ScherkSequence, gamma_adjacent_nodes, run_dirichlet, run_scherk
from .growth import GrowthReport, WedgeGrowthRun, comparison_surface, fit_growth, run_wedge_growth
from .halfplane import HalfplaneRun, ReflectionRun, bounded_odd_example, mirror_mesh, run_halfplane, run_reflection
from .nonexist import NonexistenceProbe, ShadowContact, notch_data, run_nonexistence_probe, shadow_first_contact
from .symmetry import fmp_constant, isometry_defect, scaling_defect

__all__ = [
    "Barrier", "GrowthReport", "HalfplaneRun", "InvariantViolation", "NonexistenceProbe", "ReflectionRun",
    "ScherkSequence", "ShadowContact", "WedgeGrowthRun", "barrier_dominates", "bounded_odd_example",
    "build_barrier", "comparison_surface", "fit_growth", "fmp_constant", "isometry_defect", "gamma_adjacent_nodes", "is_convex_point",
    "mirror_mesh", "notch_data", "run_dirichlet", "run_halfplane", "run_nonexistence_probe", "run_reflection",
    "run_scherk", "run_wedge_growth", "scaling_defect", "shadow_first_contact",
]
