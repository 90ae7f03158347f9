"""Sturm-Liouville problems with degenerate two-point boundary conditions.

Forward solver, characteristic determinants and their zeros, Green
function and residue projections, and the inverse construction of a
potential from a prescribed characteristic determinant.
"""
from .errors import DegenslError, NumericalError, ValidationError
from .potential import PotentialGrid, builtin, load_potential
from .spectral import BoundaryTheta, SearchRegion, SpectralPoint, char_det, dirichlet_det, find_zeros
from .target import TargetDeterminant, eval_f, eval_v

__all__ = [
    "BoundaryTheta",
    "DegenslError",
    "NumericalError",
    "PotentialGrid",
    "SearchRegion",
    "SpectralPoint",
    "TargetDeterminant",
    "ValidationError",
    "builtin",
    "char_det",
    "dirichlet_det",
    "eval_f",
    "eval_v",
    "find_zeros",
    "load_potential",
]
