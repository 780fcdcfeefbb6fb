"""Numerical verification of branched immersed surfaces in space forms.

The package computes curvature invariants of conformal charts, Hopf-type
holomorphic differentials, free-boundary contact angles against geodesic
spheres, and codimension-reduction certificates.
"""

from .errors import (
    ContractError,
    DegeneracyError,
    FreeBoundaryViolation,
    GeometryError,
    InconsistencyError,
    InputError,
    InsufficientDataError,
    OrientationError,
    VerificationError,
)
from .gallery import build_entry, list_gallery
from .spaceform import GeodesicBall, SpaceForm

__all__ = [
    "ContractError",
    "DegeneracyError",
    "FreeBoundaryViolation",
    "GeodesicBall",
    "GeometryError",
    "InconsistencyError",
    "InputError",
    "InsufficientDataError",
    "OrientationError",
    "SpaceForm",
    "VerificationError",
    "build_entry",
    "list_gallery",
]
