"""Adaptive hierarchical Poincare-Steklov (HPS) solver for 2D elliptic problems."""

from .adaptivity import AdaptiveOptions, AdaptiveResult, adaptive_interp_mesh, adaptive_solve
from .leafops import PdeOperatorSpec
from .meshtree import MeshTree, Rect, level_restrict, uniform_tree
from .problems import catalog, relative_error
from .solver import SolutionField, build, solve, update_after_refinement

__all__ = [
    "AdaptiveOptions", "AdaptiveResult", "adaptive_interp_mesh", "adaptive_solve",
    "PdeOperatorSpec", "MeshTree", "Rect", "level_restrict", "uniform_tree",
    "catalog", "relative_error", "SolutionField", "build", "solve", "update_after_refinement",
]
