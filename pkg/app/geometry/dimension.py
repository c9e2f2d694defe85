"""Local volume V_psi(r) and the log-log slope estimate of local dimension."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.geometry.core import PointCloud, RadiusGrid, range_count
from app.geometry.errors import InsufficientNeighbors, InvalidGrid, UndefinedAtRadius

logger = logging.getLogger(__name__)

V_MIN = 10
GRID_SIZE = 32
GRID_START_NEIGHBOR = 5
R_MAX_NEIGHBOR = 500
R_MAX_SAMPLE = 1000


@dataclass(frozen=True)
class Estimator:
    kind: str = "regression"
    window: int = 5

    def __post_init__(self):
        if self.kind not in ("two-point", "regression"):
            raise ValueError(f"unknown estimator {self.kind!r}")
        if self.kind == "regression" and (self.window < 3 or self.window % 2 == 0):
            raise ValueError(f"regression window must be odd and >= 3, got {self.window}")

    @classmethod
    def two_point(cls):
        return cls("two-point", 2)

    @classmethod
    def regression(cls, window=5):
        return cls("regression", window)

    def describe(self):
        return "two-point" if self.kind == "two-point" else f"regression({self.window})"


DEFAULT_ESTIMATOR = Estimator.regression(5)


@dataclass(frozen=True)
class DimensionSample:
    r: float
    volume: int
    dim: Optional[float]

    @property
    def defined(self):
        return self.dim is not None


@dataclass(frozen=True)
class DimensionProfile:
    point_id: Union[int, str]
    samples: tuple
    grid: RadiusGrid
    estimator: Estimator
    v_min: int = V_MIN

    def defined(self):
        return [s for s in self.samples if s.defined]

    def dim_at(self, r):
        for sample in self.samples:
            if sample.r == r:
                if sample.dim is None:
                    raise UndefinedAtRadius(r)
                return sample.dim
        raise UndefinedAtRadius(r)

    def median_dim(self):
        dims = [s.dim for s in self.defined()]
        return float(np.median(dims)) if dims else None

    def to_columns(self):
        return {
            "r": [s.r for s in self.samples],
            "V": [s.volume for s in self.samples],
            "dim": [s.dim for s in self.samples],
        }


def local_volume(cloud: PointCloud, psi, r: float) -> int:
    return range_count(cloud, psi, r)


def local_volumes(cloud: PointCloud, psi, radii) -> np.ndarray:
    """V_psi at every radius in ``radii`` from a single exact range query."""
    radii = np.asarray(radii, dtype=np.float64)
    _, dists = cloud.neighbors(psi, float(radii.max()))
    return volumes_from_distances(dists, radii)


def volumes_from_distances(sorted_dists, radii) -> np.ndarray:
    return np.searchsorted(sorted_dists, radii, side="right").astype(np.int64)


def _two_point_slope(v_lo, v_hi, r, dr):
    return (math.log(v_hi) - math.log(v_lo)) / (math.log(r + dr) - math.log(r))


def dimension_at(cloud: PointCloud, psi, r: float, dr: float, v_min: int = V_MIN) -> float:
    if not (r > 0 and dr > 0):
        raise ValueError(f"need r > 0 and dr > 0, got {r}, {dr}")
    v_lo = local_volume(cloud, psi, r)
    if v_lo < v_min:
        raise InsufficientNeighbors(v_lo, v_min, r)
    v_hi = local_volume(cloud, psi, r + dr)
    return _two_point_slope(v_lo, v_hi, r, dr)


def two_point_dims(radii, volumes, v_min):
    dims = [None] * len(radii)
    for i in range(len(radii) - 1):
        if volumes[i] >= v_min:
            dims[i] = _two_point_slope(int(volumes[i]), int(volumes[i + 1]),
                                       float(radii[i]), float(radii[i + 1] - radii[i]))
    return dims


def regression_dims(radii, volumes, v_min, window):
    dims = [None] * len(radii)
    half = window // 2
    if len(radii) < window:
        return dims
    x = sliding_window_view(np.log(np.asarray(radii, dtype=np.float64)), window)
    y = sliding_window_view(np.log(np.maximum(np.asarray(volumes, dtype=np.float64), 1.0)), window)
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)
    slopes = np.sum(xc * yc, axis=1) / np.sum(xc * xc, axis=1)
    for j, slope in enumerate(slopes):
        if volumes[j] >= v_min:
            dims[j + half] = max(0.0, float(slope))
    return dims


def profile_from_distances(point_id, sorted_dists, grid: RadiusGrid,
                           estimator: Estimator = DEFAULT_ESTIMATOR, v_min: int = V_MIN):
    """Build a profile from the sorted distances seen from one point."""
    radii = grid.as_array()
    volumes = volumes_from_distances(sorted_dists, radii)
    if estimator.kind == "two-point":
        dims = two_point_dims(radii, volumes, v_min)
    else:
        dims = regression_dims(radii, volumes, v_min, estimator.window)
    samples = tuple(DimensionSample(float(r), int(v), d) for r, v, d in zip(radii, volumes, dims))
    return DimensionProfile(point_id, samples, grid, estimator, v_min)


def dimension_profile(cloud: PointCloud, psi, grid: RadiusGrid,
                      estimator: Estimator = DEFAULT_ESTIMATOR, v_min: int = V_MIN,
                      point_id=None) -> DimensionProfile:
    _, dists = cloud.neighbors(psi, grid.r_max)
    return profile_from_distances(point_id, dists, grid, estimator, v_min)


def empty_profile(point_id, estimator: Estimator = DEFAULT_ESTIMATOR, v_min: int = V_MIN):
    """Profile of a point whose neighbourhood cannot support a grid."""
    return DimensionProfile(point_id, (), None, estimator, v_min)


def default_grid(cloud: PointCloud, psi, r_max: float, size: int = GRID_SIZE) -> RadiusGrid:
    """Log-spaced grid from the 5th-neighbour distance of ``psi`` up to ``r_max``.

    Raises InvalidGrid when the 5th neighbour already lies beyond ``r_max``.
    """
    r_min = cloud.kth_neighbor_distance(psi, GRID_START_NEIGHBOR)
    if not 0 < r_min < r_max:
        raise InvalidGrid(f"grid start {r_min:.4g} is not below r_max {r_max:.4g}")
    return RadiusGrid.geometric(r_min, r_max, size)


def neighbor_scale(cloud: PointCloud, psi, neighbors: int = R_MAX_NEIGHBOR) -> float:
    return cloud.kth_neighbor_distance(psi, min(neighbors, len(cloud) - 1))


def default_r_max(cloud: PointCloud, neighbors: int = R_MAX_NEIGHBOR,
                  max_points: int = R_MAX_SAMPLE) -> float:
    """Median distance to the ``neighbors``-th neighbour over a strided sample."""
    if len(cloud) < 2:
        return 0.0
    stride = max(1, math.ceil(len(cloud) / max_points))
    scales = [neighbor_scale(cloud, cloud.points[i], neighbors) for i in range(0, len(cloud), stride)]
    r_max = float(np.median(scales))
    logger.warning("r_max derived from data: %.6g (%d-th neighbour median)", r_max, neighbors)
    return r_max


def dimensional_variation(profile: DimensionProfile, r1: float, r2: float) -> float:
    return abs(profile.dim_at(r1) - profile.dim_at(r2))
