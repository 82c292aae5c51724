"""Common fixed points of commuting nonexpansive maps via recursive retractions."""

from .errors import *  # noqa: F401,F403
from .geometry import ConvexBody, NormedSpace, diameter, membership, norm_of, sample_points
from .km import KMTrace, asymptotic_regularity_check, km_iterate
from .maps import (
    Affine,
    CertifiedMap,
    CommutingFamily,
    Composite,
    CoordWise,
    Isometry,
    Rotation2D,
    SquareMap,
    certify,
    certify_commuting,
    certify_nonexpansive,
    eval_map,
    identity_map,
    square_map_example,
)
from .resolvent import banach_solve, resolve, single_retraction
from .retraction import RetractionProc, apply, build_retraction, fixed_set_identity_check

__version__ = "0.1.0"
