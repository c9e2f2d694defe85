"""Tangent cone at a singular point, estimated as clusters of directions.

Directions x - s of the points around s are clustered on P^{n-1} with a
projective k-means: assignment by angular distance, centroid update by the
principal eigenvector of the members' scatter sum(d d^T), which does not care
which of the two unit representatives a member uses. Clusters that touch are
then merged, the way mode-seeking merges modes closer than a bandwidth.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import eigh
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from app.geometry.core import (
    ZERO_TOL,
    PointCloud,
    ProjectivePoint,
    RadiusGrid,
    canonical_rows,
    projective_distances,
)
from app.geometry.dimension import (
    DEFAULT_ESTIMATOR,
    GRID_START_NEIGHBOR,
    V_MIN,
    Estimator,
    dimension_profile,
)
from app.geometry.errors import EmptyNeighborhood, InsufficientNeighbors, InvalidGrid

logger = logging.getLogger(__name__)

K_MAX = 8
MERGE_ANGLE_DEG = 20.0
MAX_ITER = 200
EXACT_MEDOID_LIMIT = 2000
MEDOID_CANDIDATES = 256
INNER_FRACTION = 0.1
MIN_CLUSTER_FRACTION = 0.02


@dataclass(frozen=True, eq=False)
class LocalDirections:
    center: np.ndarray
    r_loc: float
    ids: np.ndarray
    reps: np.ndarray
    coincident: int = 0

    def __len__(self):
        return len(self.ids)

    def pairs(self):
        return [(int(i), ProjectivePoint(rep)) for i, rep in zip(self.ids, self.reps)]

    @classmethod
    def from_pairs(cls, pairs, center=None, r_loc=0.0):
        """Wrap ``(index, ProjectivePoint)`` pairs, e.g. directions built by hand."""
        ids = np.asarray([i for i, _ in pairs], dtype=np.intp)
        reps = canonical_rows(np.stack([p.rep for _, p in pairs]))
        if center is None:
            center = np.zeros(reps.shape[1])
        return cls(np.asarray(center, dtype=np.float64), float(r_loc), ids, reps, 0)


@dataclass(frozen=True, eq=False)
class DirectionCluster:
    centroid: ProjectivePoint
    member_ids: tuple
    spread: float
    dim: Optional[float] = None

    def to_dict(self):
        return {
            "centroid": self.centroid.to_list(),
            "members": len(self.member_ids),
            "spread_deg": math.degrees(self.spread),
            "dim": self.dim,
        }


@dataclass(frozen=True, eq=False)
class TangentConeEstimate:
    center: np.ndarray
    r_loc: float
    clusters: tuple
    coincident: int = 0
    iterations: int = 0
    converged: bool = True

    def __len__(self):
        return len(self.clusters)

    def centroid_matrix(self):
        return np.stack([c.centroid.rep for c in self.clusters])

    def nearest(self, reps):
        """Nearest cluster per row of ``reps``; ties go to the lowest index."""
        return _assign(np.atleast_2d(reps), self.centroid_matrix())

    def to_dict(self):
        return {
            "center": [float(x) for x in self.center],
            "r_loc": self.r_loc,
            "k": len(self.clusters),
            "coincident_skipped": self.coincident,
            "iterations": self.iterations,
            "converged": self.converged,
            "clusters": [c.to_dict() for c in self.clusters],
        }


def local_directions(cloud: PointCloud, s, r_loc: float, r_in: float = 0.0) -> LocalDirections:
    """Unit secant directions of the points with ``r_in <= |x - s| <= r_loc``.

    Points within ``ZERO_TOL`` of ``s`` have no direction; they are counted
    as coincident and skipped.
    """
    if not r_loc > 0:
        raise ValueError(f"r_loc must be positive, got {r_loc}")
    if not 0 <= r_in < r_loc:
        raise ValueError(f"r_in must lie in [0, r_loc), got {r_in}")
    s = np.asarray(s, dtype=np.float64)
    ids, dists = cloud.neighbors(s, r_loc)
    coincident = int(np.count_nonzero(dists < ZERO_TOL))
    keep = dists >= max(ZERO_TOL, r_in)
    ids = np.sort(ids[keep])
    if len(ids) == 0:
        raise EmptyNeighborhood(r_loc, coincident)
    reps = canonical_rows(cloud.points[ids] - s)
    return LocalDirections(s, float(r_loc), ids, reps, coincident)


def _assign(reps, centroids):
    dist = np.stack([projective_distances(reps, c) for c in centroids], axis=1)
    return np.argmin(dist, axis=1)


def _principal_direction(members):
    scatter = members.T @ members
    _, vectors = eigh(scatter)
    return canonical_rows(vectors[:, -1][None, :])[0]


def _farthest_point_seeds(reps, k):
    seeds = [0]
    nearest = projective_distances(reps, reps[0])
    while len(seeds) < k:
        j = int(np.argmax(nearest))
        if nearest[j] <= 0.0:
            break
        seeds.append(j)
        nearest = np.minimum(nearest, projective_distances(reps, reps[j]))
    return reps[seeds]


def _update(reps, labels):
    present = np.unique(labels)
    compact = np.searchsorted(present, labels)
    centroids = np.stack([_principal_direction(reps[compact == j]) for j in range(len(present))])
    return centroids, compact


def _lloyd(reps, centroids, max_iter):
    labels = _assign(reps, centroids)
    for iteration in range(1, max_iter + 1):
        centroids, labels = _update(reps, labels)
        relabeled = _assign(reps, centroids)
        if np.array_equal(relabeled, labels):
            return centroids, labels, iteration, True
        labels = relabeled
    logger.warning("projective k-means hit the iteration cap (%d)", max_iter)
    centroids, labels = _update(reps, labels)
    return centroids, labels, max_iter, False


def member_gap(reps_a, reps_b) -> float:
    """Smallest projective distance between a member of one set and one of the other."""
    tree = cKDTree(np.vstack([reps_b, -reps_b]))
    chord, _ = tree.query(reps_a, k=1)
    return 2.0 * math.asin(min(1.0, float(np.min(chord)) / 2.0))


def _merge_touching(reps, labels, threshold, min_members=1):
    """Single-linkage merge of clusters whose members come within ``threshold``.

    Sectors of one branch touch each other; distinct branches stay apart by
    their smallest principal angle. Clusters with fewer than ``min_members``
    members take no part in the linkage; their members join the nearest
    merged cluster afterwards.
    """
    present, sizes = np.unique(labels, return_counts=True)
    keys = [int(j) for j, size in zip(present, sizes) if size >= min_members]
    if not keys:
        keys = [int(j) for j in present]
    groups = {j: [j] for j in keys}
    members = {j: reps[labels == j] for j in keys}
    gaps = {}
    for x, i in enumerate(keys):
        for j in keys[x + 1:]:
            gaps[i, j] = member_gap(members[i], members[j])
    while gaps:
        (i, j), gap = min(gaps.items(), key=lambda item: (item[1], item[0]))
        if gap >= threshold:
            break
        logger.debug("merging direction clusters %d and %d (gap %.2f deg)", i, j, math.degrees(gap))
        groups[i].extend(groups.pop(j))
        for other in groups:
            if other == i:
                continue
            a, b = sorted((i, other))
            c, d = sorted((j, other))
            gaps[a, b] = min(gaps[a, b], gaps.pop((c, d)))
        gaps.pop((i, j))
    merged = labels.copy()
    for root, parts in groups.items():
        merged[np.isin(labels, parts)] = root
    stray = ~np.isin(labels, keys)
    if np.any(stray):
        roots = sorted(groups)
        centroids = np.stack([_principal_direction(reps[merged == root]) for root in roots])
        merged[stray] = np.asarray(roots)[_assign(reps[stray], centroids)]
        logger.debug("folded %d directions from %d small clusters", int(np.count_nonzero(stray)),
                     len(present) - len(keys))
    return merged


def cluster_directions(directions: LocalDirections, k: Optional[int] = None,
                       merge_angle_deg: float = MERGE_ANGLE_DEG, k_max: int = K_MAX,
                       max_iter: int = MAX_ITER,
                       min_fraction: float = MIN_CLUSTER_FRACTION) -> TangentConeEstimate:
    """Projective k-means with farthest-point seeding.

    With ``k`` given the result keeps at most ``k`` clusters (fewer only when
    there are fewer distinct directions). Without it the search starts from
    ``k_max`` clusters and joins those whose members come closer than
    ``merge_angle_deg`` (single linkage); each joined cluster gets the
    principal direction of all its members. Clusters holding less than
    ``min_fraction`` of the directions are left out of the
    linkage and folded into the nearest joined cluster.
    """
    if k is not None and k < 1:
        raise ValueError(f"k must be positive, got {k}")
    reps = directions.reps
    if len(reps) == 0:
        raise EmptyNeighborhood(directions.r_loc, directions.coincident)
    seeds = _farthest_point_seeds(reps, k if k is not None else k_max)
    centroids, labels, iterations, converged = _lloyd(reps, seeds, max_iter)
    if k is None:
        min_members = max(1, math.ceil(min_fraction * len(reps)))
        labels = _merge_touching(reps, labels, math.radians(merge_angle_deg), min_members)
        centroids, labels = _update(reps, labels)

    clusters = []
    for j, centroid in enumerate(centroids):
        mask = labels == j
        centroid.setflags(write=False)
        spread = float(np.mean(projective_distances(reps[mask], centroid)))
        members = tuple(int(i) for i in directions.ids[mask])
        clusters.append(DirectionCluster(ProjectivePoint(centroid), members, spread))
    logger.info("tangent cone: %d direction clusters after %d iterations", len(clusters), iterations)
    return TangentConeEstimate(directions.center, directions.r_loc, tuple(clusters),
                               directions.coincident, iterations, converged)


def medoid_index(points) -> int:
    """Index of the medoid; large sets search the members nearest the mean."""
    points = np.asarray(points)
    if len(points) <= EXACT_MEDOID_LIMIT:
        return int(np.argmin(cdist(points, points).sum(axis=1)))
    logger.warning("medoid over %d points approximated from %d candidates",
                   len(points), MEDOID_CANDIDATES)
    near_mean = np.argsort(np.linalg.norm(points - points.mean(axis=0), axis=1),
                           kind="stable")[:MEDOID_CANDIDATES]
    totals = cdist(points[near_mean], points).sum(axis=1)
    return int(near_mean[np.argmin(totals)])


def estimate_cluster_dimension(cloud: PointCloud, member_ids, grid: Optional[RadiusGrid] = None,
                               estimator: Estimator = DEFAULT_ESTIMATOR, v_min: int = V_MIN) -> float:
    """Median defined dimension of the members' sub-cloud, seen from its medoid."""
    member_ids = np.asarray(sorted(member_ids), dtype=np.intp)
    if len(member_ids) < v_min:
        raise InsufficientNeighbors(len(member_ids), v_min)
    sub = cloud.subset(member_ids)
    center = sub.points[medoid_index(sub.points)]
    if grid is None:
        reach = float(np.max(np.linalg.norm(sub.points - center, axis=1))) / 2.0
        r_min = sub.kth_neighbor_distance(center, GRID_START_NEIGHBOR)
        try:
            grid = RadiusGrid.geometric(r_min, reach)
        except InvalidGrid:
            raise InsufficientNeighbors(len(member_ids), v_min) from None
    profile = dimension_profile(sub, center, grid, estimator, v_min)
    median = profile.median_dim()
    if median is None:
        raise InsufficientNeighbors(len(member_ids), v_min)
    return median


def with_dimensions(cloud: PointCloud, cone: TangentConeEstimate,
                    estimator: Estimator = DEFAULT_ESTIMATOR, v_min: int = V_MIN) -> TangentConeEstimate:
    clusters = []
    for j, cluster in enumerate(cone.clusters):
        try:
            dim = estimate_cluster_dimension(cloud, cluster.member_ids, None, estimator, v_min)
        except InsufficientNeighbors as exc:
            logger.info("cluster %d: dimension undetermined (%s)", j, exc)
            dim = None
        clusters.append(replace(cluster, dim=dim))
    return replace(cone, clusters=tuple(clusters))


def default_locality_radius(profile, witness, fallback: float) -> float:
    """Largest defined grid radius not beyond the witness' outer radius."""
    limit = witness.r2 if witness is not None else fallback
    radii = [s.r for s in profile.defined() if s.r <= limit]
    return max(radii) if radii else fallback


def tangent_cone(cloud: PointCloud, s, r_loc: float, k: Optional[int] = None,
                 merge_angle_deg: float = MERGE_ANGLE_DEG, k_max: int = K_MAX,
                 estimator: Estimator = DEFAULT_ESTIMATOR, v_min: int = V_MIN,
                 inner_fraction: float = INNER_FRACTION) -> TangentConeEstimate:
    """Directions, clustering and per-cluster dimensions in one call.

    Points closer than ``inner_fraction * r_loc`` are left out; their
    directions are dominated by noise.
    """
    directions = local_directions(cloud, s, r_loc, inner_fraction * r_loc)
    cone = cluster_directions(directions, k, merge_angle_deg, k_max)
    return with_dimensions(cloud, cone, estimator, v_min)
