"""Weak inverse mean curvature flow in hyperbolic space: numerical laboratory.

Submodules
----------
hypgeo     coordinates, distances and sphere inversions of the Poincare ball
starshape  axisymmetric radial graphs, their geometry and surface integrals
reflect    Alexandrov-reflection certificates and the waiting time
flows      parametric IMCF and MCF on radial graphs
weakflow   elliptic-regularized level-set solver
funcs      Heintze-Karcher, Minkowski and monotone functionals
cli        scenario runner
"""
__version__ = "0.1.0"
