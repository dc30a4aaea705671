"""Cubic macro-element splines on triangulations with locally supported bases.

Modules: :mod:`mesh` (triangulations), :mod:`bbform` (Bernstein-Bezier
patches), :mod:`smoothness` (C1 edge functionals), :mod:`macro` (the three
constructions), :mod:`basis` (vertex-triangle bases), :mod:`approx` (fitting
and PDE solvers) and :mod:`harness` (experiments).
"""

from .basis import BasisSet, VertexFrame, build_basis, build_frame, min_area_triangle
from .bbform import Spline, integrate
from .macro import MacroKind, VertexLinear, construct
from .mesh import Triangulation, build, load_mesh, refine_clough_tocher, refine_midpoint

__all__ = [
    "BasisSet", "MacroKind", "Spline", "Triangulation", "VertexFrame", "VertexLinear",
    "build", "build_basis", "build_frame", "construct", "integrate", "load_mesh",
    "min_area_triangle", "refine_clough_tocher", "refine_midpoint",
]
