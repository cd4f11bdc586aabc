"""Smoothed online learning with John-ellipsoid cutting planes."""
from .convex_geometry import (
    Ellipsoid,
    HalfspacePolytope,
    InfeasibleOrDegenerate,
    LPFailure,
    max_inscribed_ellipsoid,
    prune_redundant,
    sandwich_check,
    sample_uniform_ball,
)
from .erm_oracle import ErmInfeasible, erm_partition
from .learners import NonRealizable

__version__ = "0.1.0"

__all__ = [
    "Ellipsoid",
    "ErmInfeasible",
    "HalfspacePolytope",
    "InfeasibleOrDegenerate",
    "LPFailure",
    "NonRealizable",
    "erm_partition",
    "max_inscribed_ellipsoid",
    "prune_redundant",
    "sample_uniform_ball",
    "sandwich_check",
]
