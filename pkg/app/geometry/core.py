"""Metric and projective primitives shared by every analysis module.

Points are rows of float64 numpy arrays. Range queries go through a
``scipy.spatial.cKDTree`` for candidate retrieval, then every candidate is
re-measured with :func:`euclidean`, so the index answers exactly what a linear
scan would.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from app.geometry.errors import (
    DimensionMismatch,
    InvalidCloud,
    InvalidGrid,
    NonPositiveScale,
    ZeroVector,
)

ZERO_TOL = 1e-12
# Unit directions are snapped to this dyadic lattice before the final
# normalisation; p(v) and p(av) then agree bit for bit.
SNAP_STEP = 2.0 ** -30
KD_SLACK = 1e-9


def euclidean(points, center):
    """Distances from each row of ``points`` to ``center``."""
    diff = np.asarray(points, dtype=np.float64) - np.asarray(center, dtype=np.float64)
    return np.sqrt(np.sum(diff * diff, axis=1))


def canonical_rows(vectors):
    """Projective canonical representatives of the rows of ``vectors``.

    Rows must be non-zero (callers filter them); the result has unit rows
    whose first coordinate above ``ZERO_TOL`` in magnitude is positive.
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms < ZERO_TOL):
        raise ZeroVector(norms.min())
    unit = vectors / norms[:, None]
    snapped = np.round(unit / SNAP_STEP) * SNAP_STEP
    reps = snapped / np.linalg.norm(snapped, axis=1)[:, None]
    significant = np.abs(reps) > ZERO_TOL
    first = np.argmax(significant, axis=1)
    signs = np.sign(reps[np.arange(len(reps)), first])
    reps = reps * signs[:, None]
    reps[~significant] = 0.0
    return reps


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """A line through the origin, stored as its canonical unit representative."""

    rep: np.ndarray

    @property
    def n(self):
        return self.rep.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ProjectivePoint):
            return NotImplemented
        return self.rep.shape == other.rep.shape and np.array_equal(self.rep, other.rep)

    def __hash__(self):
        return hash(self.rep.tobytes())

    def to_list(self):
        return [float(x) for x in self.rep]


def projective_from_vector(v, n: Optional[int] = None) -> ProjectivePoint:
    v = np.asarray(v, dtype=np.float64).ravel()
    if n is not None and v.shape[0] != n:
        raise DimensionMismatch(n, v.shape[0])
    norm = float(np.linalg.norm(v))
    if norm < ZERO_TOL:
        raise ZeroVector(norm)
    rep = canonical_rows(v[None, :])[0]
    rep.setflags(write=False)
    return ProjectivePoint(rep)


def projective_distances(reps, rep):
    """Angular distance arccos|<a, b>| from each row of ``reps`` to ``rep``.

    Evaluated as 2 atan2(min(|a-b|, |a+b|), max(...)), which is exact at zero
    and keeps precision for small angles where arccos does not.
    """
    reps = np.atleast_2d(np.asarray(reps, dtype=np.float64))
    rep = np.asarray(rep, dtype=np.float64)
    minus = np.linalg.norm(reps - rep, axis=1)
    plus = np.linalg.norm(reps + rep, axis=1)
    return 2.0 * np.arctan2(np.minimum(minus, plus), np.maximum(minus, plus))


def projective_distance(a: ProjectivePoint, b: ProjectivePoint) -> float:
    if a.n != b.n:
        raise DimensionMismatch(a.n, b.n)
    return float(projective_distances(a.rep[None, :], b.rep)[0])


@dataclass(frozen=True, eq=False)
class BlowupPoint:
    base: np.ndarray
    dir: ProjectivePoint
    is_exceptional: bool = False


def blowup_distance(a: BlowupPoint, b: BlowupPoint, lam: float) -> float:
    """Product metric on base x P^{n-1}: sqrt(|a-b|^2 + lam^2 theta^2)."""
    if not lam > 0:
        raise NonPositiveScale(lam)
    if a.base.shape != b.base.shape:
        raise DimensionMismatch(a.base.shape[0], b.base.shape[0])
    base_sq = float(np.sum((a.base - b.base) ** 2))
    theta = projective_distance(a.dir, b.dir)
    return math.sqrt(base_sq + (lam * theta) ** 2)


def blowup_distances(bases, reps, center_base, center_rep, lam):
    """Vectorised :func:`blowup_distance` from one point to many."""
    if not lam > 0:
        raise NonPositiveScale(lam)
    diff = np.asarray(bases) - np.asarray(center_base)
    base_sq = np.sum(diff * diff, axis=1)
    theta = projective_distances(reps, center_rep)
    return np.sqrt(base_sq + (lam * theta) ** 2)


@dataclass(frozen=True)
class RadiusGrid:
    radii: tuple

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        if len(radii) < 4:
            raise InvalidGrid(f"need at least 4 radii, got {len(radii)}")
        if radii[0] <= 0 or not all(math.isfinite(r) for r in radii):
            raise InvalidGrid("radii must be positive and finite")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise InvalidGrid("radii must be strictly increasing")
        object.__setattr__(self, "radii", radii)

    @property
    def r_max(self):
        return self.radii[-1]

    def __len__(self):
        return len(self.radii)

    def as_array(self):
        return np.asarray(self.radii)

    def scaled(self, factor):
        return RadiusGrid(tuple(r * factor for r in self.radii))

    def truncated(self, r_max):
        return RadiusGrid(tuple(r for r in self.radii if r <= r_max))

    @classmethod
    def geometric(cls, r_min, r_max, size=32):
        if not 0 < r_min < r_max:
            raise InvalidGrid(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
        radii = np.geomspace(r_min, r_max, size)
        radii[-1] = r_max
        return cls(tuple(radii))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Finite point set in R^n with an exact range-query index."""

    points: np.ndarray
    labels: Optional[tuple] = None
    _tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64, copy=True)
        if points.ndim != 2:
            raise InvalidCloud(f"points must be a 2-d array, got shape {points.shape}")
        if points.shape[0] < 1 or points.shape[1] < 2:
            raise InvalidCloud(f"need N >= 1 and n >= 2, got {points.shape}")
        if not np.all(np.isfinite(points)):
            row = int(np.argwhere(~np.isfinite(points))[0][0])
            raise InvalidCloud(f"non-finite coordinate in row {row}")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        if self.labels is not None:
            labels = tuple(str(label) for label in self.labels)
            if len(labels) != points.shape[0]:
                raise InvalidCloud(f"{len(labels)} labels for {points.shape[0]} points")
            object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_tree", cKDTree(points))

    @property
    def n(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def _center(self, center):
        center = np.asarray(center, dtype=np.float64).ravel()
        if center.shape[0] != self.n:
            raise DimensionMismatch(self.n, center.shape[0])
        return center

    def neighbors(self, center, r):
        """Ids and exact distances of points within ``r`` (inclusive), sorted."""
        center = self._center(center)
        candidates = self._tree.query_ball_point(center, r * (1 + KD_SLACK) + KD_SLACK)
        ids = np.asarray(sorted(candidates), dtype=np.intp)
        dists = euclidean(self.points[ids], center) if len(ids) else np.empty(0)
        keep = dists <= r
        ids, dists = ids[keep], dists[keep]
        order = np.lexsort((ids, dists))
        return ids[order], dists[order]

    def nearest_distances(self, center, k):
        """Exact distances to the ``k`` nearest points (center itself included)."""
        center = self._center(center)
        k = min(int(k), len(self))
        _, ids = self._tree.query(center, k=k)
        ids = np.atleast_1d(ids)
        return np.sort(euclidean(self.points[ids], center))

    def kth_neighbor_distance(self, center, k):
        """Distance to the k-th nearest point other than one coincident copy of ``center``."""
        dists = self.nearest_distances(center, k + 1)
        if dists[0] < ZERO_TOL:
            dists = dists[1:]
        return float(dists[min(k, len(dists)) - 1]) if len(dists) else 0.0

    def subset(self, ids: Sequence[int]) -> "PointCloud":
        ids = np.asarray(ids, dtype=np.intp)
        labels = tuple(self.labels[i] for i in ids) if self.labels is not None else None
        return PointCloud(self.points[ids], labels)


def range_count(cloud: PointCloud, center, r: float) -> int:
    if r < 0:
        raise ValueError(f"radius must be non-negative, got {r}")
    ids, _ = cloud.neighbors(center, r)
    return int(len(ids))


def scan_range_count(cloud: PointCloud, center, r: float) -> int:
    """Linear-scan reference for :func:`range_count`."""
    return int(np.count_nonzero(euclidean(cloud.points, cloud._center(center)) <= r))
