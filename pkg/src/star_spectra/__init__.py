"""Lowest eigenvalue of attractive delta-interactions on planar star graphs.

The spectral problem is reduced to the Birman-Schwinger operator with kernel
``K0(kappa |x - y|) / (2 pi)`` on the edges, discretised by a graded Nystrom
scheme, and cross-checked by an independent Galerkin discretisation.
"""

__version__ = "0.1.0"

from .geometry import StarGraph, graph_from_angles, is_congruent, symmetric_graph
from .quadrature import QuadratureRule, build_rule, default_rule
from .bs_operator import KernelMatrix, assemble
from .spectral_solver import SpectralResult, bs_value, lowest_eigenvalue, top_eigenpair
from .inequality import verify_inequality
from .optimizer import maximize_lambda1, random_graph, scan

__all__ = [
    "StarGraph", "graph_from_angles", "is_congruent", "symmetric_graph",
    "QuadratureRule", "build_rule", "default_rule",
    "KernelMatrix", "assemble",
    "SpectralResult", "bs_value", "lowest_eigenvalue", "top_eigenpair",
    "verify_inequality",
    "maximize_lambda1", "random_graph", "scan",
]
