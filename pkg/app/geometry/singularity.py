"""(epsilon, r_max)-singularity test and the singular locus S of a cloud."""
from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field, replace
from multiprocessing.pool import ThreadPool
from typing import Optional

from app.geometry.core import PointCloud
from app.geometry.dimension import (
    GRID_SIZE,
    DimensionProfile,
    Estimator,
    default_grid,
    default_r_max,
    dimension_profile,
    empty_profile,
    neighbor_scale,
)
from app.geometry.errors import ConfigError, InvalidGrid, NoDefinedSamples

logger = logging.getLogger(__name__)

# Scan defaults, stricter than the dimension module's own.
SCAN_V_MIN = 50
SCAN_ESTIMATOR = Estimator.regression(9)


class Verdict(str, enum.Enum):
    REGULAR = "regular"
    SINGULAR = "singular"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class SingularityParams:
    epsilon: float = 1.0
    r_max: Optional[float] = None
    grid_size: int = GRID_SIZE
    estimator: Estimator = SCAN_ESTIMATOR
    v_min: int = SCAN_V_MIN
    r_max_policy: str = "global"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon", f"must be > 0, got {self.epsilon}")
        if self.r_max is not None and not self.r_max > 0:
            raise ConfigError("r_max", f"must be > 0, got {self.r_max}")
        if self.grid_size < 4:
            raise ConfigError("grid_size", f"must be >= 4, got {self.grid_size}")
        if self.v_min < 1:
            raise ConfigError("v_min", f"must be >= 1, got {self.v_min}")
        if self.r_max_policy not in ("global", "per-point"):
            raise ConfigError("r_max_policy", f"unknown policy {self.r_max_policy!r}")

    def resolved(self, cloud: PointCloud) -> "SingularityParams":
        if self.r_max is not None or self.r_max_policy == "per-point":
            return self
        return replace(self, r_max=default_r_max(cloud))

    def to_dict(self):
        data = asdict(self)
        data["estimator"] = {"kind": self.estimator.kind, "window": self.estimator.window}
        return data


@dataclass(frozen=True)
class SingularityWitness:
    r1: float
    r2: float
    variation: float
    dim_r1: float
    dim_r2: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PointVerdict:
    point_id: int
    verdict: Verdict
    witness: Optional[SingularityWitness] = None
    defined_samples: int = 0
    max_variation: Optional[float] = None
    r_max: Optional[float] = None

    def to_dict(self):
        return {
            "point_id": self.point_id,
            "verdict": self.verdict.value,
            "witness": self.witness.to_dict() if self.witness else None,
            "defined_samples": self.defined_samples,
            "max_variation": self.max_variation,
            "r_max": self.r_max,
        }


@dataclass(frozen=True)
class SingularLocusReport:
    params: SingularityParams
    verdicts: tuple
    singular_ids: tuple = field(init=False)
    witnesses: dict = field(init=False)

    def __post_init__(self):
        singular = tuple(v.point_id for v in self.verdicts if v.verdict is Verdict.SINGULAR)
        object.__setattr__(self, "singular_ids", singular)
        object.__setattr__(self, "witnesses", {v.point_id: v.witness for v in self.verdicts
                                               if v.verdict is Verdict.SINGULAR})

    def verdict_of(self, point_id) -> PointVerdict:
        for verdict in self.verdicts:
            if verdict.point_id == point_id:
                return verdict
        raise KeyError(point_id)

    def counts(self):
        counts = {v.value: 0 for v in Verdict}
        for verdict in self.verdicts:
            counts[verdict.verdict.value] += 1
        return counts

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "counts": self.counts(),
            "singular_ids": list(self.singular_ids),
            "verdicts": [v.to_dict() for v in self.verdicts],
        }


def _window_samples(profile: DimensionProfile, r_max: Optional[float]):
    return [s for s in profile.defined() if r_max is None or s.r <= r_max]


def max_variation(profile: DimensionProfile, r_max: Optional[float] = None):
    """Largest |dim(r1) - dim(r2)| over defined samples, with its radii."""
    samples = _window_samples(profile, r_max)
    if len(samples) < 2:
        raise NoDefinedSamples(len(samples))
    lo = min(samples, key=lambda s: s.dim)
    hi = max(samples, key=lambda s: s.dim)
    first, second = (lo, hi) if lo.r < hi.r else (hi, lo)
    return SingularityWitness(first.r, second.r, hi.dim - lo.dim, first.dim, second.dim)


def is_singular(profile: DimensionProfile, params: SingularityParams) -> Optional[SingularityWitness]:
    witness = max_variation(profile, params.r_max)
    return witness if witness.variation > params.epsilon else None


def classify(profile: DimensionProfile, params: SingularityParams) -> PointVerdict:
    defined = len(_window_samples(profile, params.r_max))
    try:
        widest = max_variation(profile, params.r_max)
    except NoDefinedSamples:
        return PointVerdict(profile.point_id, Verdict.UNDETERMINED, None, defined, None, params.r_max)
    if widest.variation > params.epsilon:
        return PointVerdict(profile.point_id, Verdict.SINGULAR, widest, defined, widest.variation, params.r_max)
    return PointVerdict(profile.point_id, Verdict.REGULAR, None, defined, widest.variation, params.r_max)


def point_params(cloud: PointCloud, point_id: int, params: SingularityParams) -> SingularityParams:
    if params.r_max_policy == "per-point":
        return replace(params, r_max=neighbor_scale(cloud, cloud.points[point_id]))
    return params


def point_profile(cloud: PointCloud, point_id: int, params: SingularityParams) -> DimensionProfile:
    """Profile of a cloud point on its default grid; empty when no grid fits."""
    psi = cloud.points[point_id]
    try:
        grid = default_grid(cloud, psi, params.r_max, params.grid_size)
    except InvalidGrid:
        logger.debug("point %d: no grid below r_max %.4g", point_id, params.r_max)
        return empty_profile(point_id, params.estimator, params.v_min)
    return dimension_profile(cloud, psi, grid, params.estimator, params.v_min, point_id=point_id)


def scan_point(cloud: PointCloud, point_id: int, params: SingularityParams):
    local = point_params(cloud, point_id, params)
    profile = point_profile(cloud, point_id, local)
    return profile, classify(profile, local)


def singular_locus(cloud: PointCloud, params: SingularityParams, point_ids=None,
                   threads: int = 1, keep_profiles: bool = False):
    """Classify every requested point; returns the report (and profiles if asked)."""
    params = params.resolved(cloud)
    ids = list(range(len(cloud))) if point_ids is None else sorted({int(i) for i in point_ids})

    def work(point_id):
        return scan_point(cloud, point_id, params)

    if threads > 1:
        with ThreadPool(threads) as pool:
            results = pool.map(work, ids)
    else:
        results = [work(i) for i in ids]

    report = SingularLocusReport(params, tuple(verdict for _, verdict in results))
    logger.info("locus scan over %d points: %s", len(ids), report.counts())
    if keep_profiles:
        return report, {verdict.point_id: profile for profile, verdict in results}
    return report
