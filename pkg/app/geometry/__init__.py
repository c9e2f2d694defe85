"""Numerical core: local dimension, singular locus, tangent cones and blow-ups."""
from app.geometry.core import (
    BlowupPoint,
    PointCloud,
    ProjectivePoint,
    RadiusGrid,
    blowup_distance,
    projective_distance,
    projective_from_vector,
    range_count,
)
from app.geometry.dimension import DimensionProfile, Estimator, dimension_at, dimension_profile, local_volume
from app.geometry.singularity import SingularityParams, SingularLocusReport, Verdict, singular_locus
