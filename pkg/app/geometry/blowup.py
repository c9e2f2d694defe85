"""Point blow-up of a cloud: strict transform, exceptional divisor and checks.

Every cloud point x other than the center s is lifted to (x, [x - s]) in
R^n x P^{n-1}. The exceptional divisor over s is represented by one point per
tangent-cone cluster (base s, direction the cluster centroid), optionally
joined by a quasi-uniform sample of further divisor points.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from multiprocessing.pool import ThreadPool
from typing import Optional

import numpy as np
from scipy.stats import norm, qmc

from app.geometry.core import (
    ZERO_TOL,
    BlowupPoint,
    ProjectivePoint,
    RadiusGrid,
    blowup_distances,
    canonical_rows,
    euclidean,
    projective_distances,
)
from app.geometry.dimension import (
    GRID_START_NEIGHBOR,
    R_MAX_NEIGHBOR,
    DimensionProfile,
    profile_from_distances,
    volumes_from_distances,
)
from app.geometry.errors import DegenerateCenter, InvalidGrid, NoDefinedSamples, NonPositiveScale
from app.geometry.singularity import SingularityParams, SingularityWitness, max_variation

logger = logging.getLogger(__name__)

METRIC_SHRINK = 5.0
METRIC_PAIRS = 200
METRIC_SEED = 3


def _frozen(array, dtype=np.float64):
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class BlownUpCloud:
    """Blow-up of a cloud at ``center``, stored column-wise.

    Row i of ``bases``/``dirs`` is the lift of cloud point ``origin_ids[i]``.
    Row j of ``exceptional_dirs`` is a divisor point; the first ``len(cone)``
    rows are the cone centroids, later rows come from dense sampling.
    ``exceptional_cluster[j]`` is the cone cluster a divisor point belongs to.
    """

    center: np.ndarray
    lam: float
    bases: np.ndarray
    dirs: np.ndarray
    origin_ids: np.ndarray
    exceptional_dirs: np.ndarray
    exceptional_cluster: np.ndarray
    cone: object
    coincident: int = 0

    @property
    def n(self):
        return self.center.shape[0]

    @property
    def lifted(self):
        return [BlowupPoint(base, ProjectivePoint(rep)) for base, rep in zip(self.bases, self.dirs)]

    @property
    def exceptional(self):
        return [BlowupPoint(self.center, ProjectivePoint(rep), is_exceptional=True)
                for rep in self.exceptional_dirs]

    @property
    def cone_size(self):
        return len(self.cone.clusters)

    def lifted_clusters(self):
        """Nearest cone cluster of every lifted direction."""
        return self.cone.nearest(self.dirs)

    def to_dict(self):
        return {
            "center": [float(x) for x in self.center],
            "lambda": self.lam,
            "lifted": int(len(self.bases)),
            "exceptional": int(len(self.exceptional_dirs)),
            "dense_exceptional": int(len(self.exceptional_dirs) - self.cone_size),
            "coincident_with_center": self.coincident,
        }


def default_lambda(cloud, s, cone) -> float:
    """Median distance from ``s`` to the members of the cone clusters."""
    members = sorted({i for c in cone.clusters for i in c.member_ids})
    if not members:
        raise DegenerateCenter("tangent cone has no members to derive lambda from")
    return float(np.median(euclidean(cloud.points[members], s)))


def dense_divisor_dirs(n: int, m: int, seed: int) -> np.ndarray:
    """``m`` quasi-uniform points of P^{n-1} from a scrambled Sobol sequence.

    Sobol points are pushed through the Gaussian quantile function, which
    makes their directions close to uniform on the sphere; canonicalisation
    then folds antipodes together.
    """
    sampler = qmc.Sobol(d=n, scramble=True, seed=np.random.Generator(np.random.Philox(seed)))
    u = sampler.random_base2(max(0, math.ceil(math.log2(max(m, 1)))))[:m]
    u = np.clip(u, 1e-12, 1 - 1e-12)
    return canonical_rows(norm.ppf(u))


def blow_up(cloud, s, cone, lam: Optional[float] = None, dense_divisor: int = 0,
            seed: int = 0) -> BlownUpCloud:
    s = _frozen(cloud._center(s))
    dists = euclidean(cloud.points, s)
    keep = dists >= ZERO_TOL
    if not np.any(keep):
        raise DegenerateCenter(f"all {len(cloud)} points coincide with the center")
    if lam is None:
        lam = default_lambda(cloud, s, cone)
    if not lam > 0:
        raise NonPositiveScale(lam)

    origin_ids = np.flatnonzero(keep)
    bases = cloud.points[origin_ids]
    dirs = canonical_rows(bases - s)

    exceptional = np.stack([c.centroid.rep for c in cone.clusters])
    clusters = np.arange(len(cone.clusters))
    if dense_divisor:
        extra = dense_divisor_dirs(cloud.n, dense_divisor, seed)
        exceptional = np.vstack([exceptional, extra])
        clusters = np.concatenate([clusters, cone.nearest(extra)])

    blownup = BlownUpCloud(
        center=s,
        lam=float(lam),
        bases=_frozen(bases),
        dirs=_frozen(dirs),
        origin_ids=_frozen(origin_ids, np.intp),
        exceptional_dirs=_frozen(exceptional),
        exceptional_cluster=_frozen(clusters, np.intp),
        cone=cone,
        coincident=int(len(cloud) - len(origin_ids)),
    )
    logger.info("blow-up at %s: %d lifted, %d exceptional (lambda %.4g)",
                np.array2string(s, precision=4), len(bases), len(exceptional), lam)
    return blownup


def project(p: BlowupPoint):
    return p.base


@dataclass(frozen=True)
class IsomorphismReport:
    ok: bool
    failing_ids: tuple
    max_discrepancy: float
    shrunk_discrepancy: float
    shrink_factor: float
    bound: float

    def to_dict(self):
        return {
            "ok": self.ok,
            "failing_ids": list(self.failing_ids),
            "max_discrepancy": self.max_discrepancy,
            "shrunk_discrepancy": self.shrunk_discrepancy,
            "shrink_factor": self.shrink_factor if math.isfinite(self.shrink_factor) else None,
            "bound": self.bound,
        }


def _metric_discrepancy(bases, dirs, pairs, lam):
    worst = 0.0
    for a, b in pairs:
        base = float(euclidean(bases[a][None, :], bases[b])[0])
        lifted = float(blowup_distances(bases[a][None, :], dirs[a][None, :], bases[b], dirs[b], lam)[0])
        worst = max(worst, abs(lifted - base))
    return worst


def verify_isomorphism_away_from_center(cloud, blownup: BlownUpCloud, delta: float = 1e-9,
                                        pairs: int = METRIC_PAIRS,
                                        seed: int = METRIC_SEED) -> IsomorphismReport:
    """Check that lifting and projecting is a bijection onto the cloud minus ``s``.

    Beyond the id bookkeeping, lifted distances must stay within lam*pi/2 of
    base distances and the gap must shrink at least fivefold at lam/10.
    """
    expected = set(np.flatnonzero(euclidean(cloud.points, blownup.center) >= ZERO_TOL).tolist())
    ids = [int(i) for i in blownup.origin_ids]
    seen, duplicated = set(), set()
    for i in ids:
        (duplicated if i in seen else seen).add(i)
    failing = (expected - seen) | (seen - expected) | duplicated

    rows = min(len(ids), len(blownup.bases), len(blownup.dirs))
    if rows and len(ids) == len(blownup.bases) == len(blownup.dirs):
        idx = np.asarray(ids, dtype=np.intp)
        inside = (idx >= 0) & (idx < len(cloud))
        good = inside.copy()
        good[inside] = np.all(blownup.bases[inside] == cloud.points[idx[inside]], axis=1)
        offsets = blownup.bases - blownup.center
        good &= np.linalg.norm(offsets, axis=1) >= ZERO_TOL
        if np.any(good):
            good[good] = np.all(blownup.dirs[good] == canonical_rows(offsets[good]), axis=1)
        failing.update(int(i) for i in idx[~good & inside])
    length_ok = len(ids) == len(blownup.bases) == len(expected)

    rng = np.random.Generator(np.random.Philox(seed))
    sample = []
    if rows >= 2:
        for _ in range(pairs):
            a, b = rng.choice(rows, size=2, replace=False)
            if euclidean(blownup.bases[a][None, :], blownup.bases[b])[0] >= delta:
                sample.append((int(a), int(b)))
    lam = blownup.lam
    worst = _metric_discrepancy(blownup.bases, blownup.dirs, sample, lam)
    shrunk = _metric_discrepancy(blownup.bases, blownup.dirs, sample, lam / 10.0)
    bound = lam * math.pi / 2
    factor = worst / shrunk if shrunk > 0 else math.inf
    metric_ok = worst <= bound * (1 + 1e-12) and (worst == 0.0 or shrunk * METRIC_SHRINK <= worst)

    ok = not failing and length_ok and metric_ok
    if not ok:
        logger.warning("isomorphism check failed: %d failing ids, metric ok %s", len(failing), metric_ok)
    return IsomorphismReport(ok, tuple(sorted(failing)), worst, shrunk, factor, bound)


class Outcome(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class ExceptionalVerdict:
    index: int
    cluster: int
    direction: tuple
    outcome: Outcome
    max_variation: Optional[float]
    witness: Optional[SingularityWitness]
    profile: Optional[DimensionProfile]
    purity: tuple
    purity_break: Optional[float]

    @property
    def dims(self):
        return [s.dim for s in self.profile.defined()] if self.profile is not None else []

    def to_dict(self):
        return {
            "index": self.index,
            "cluster": self.cluster,
            "direction": list(self.direction),
            "outcome": self.outcome.value,
            "max_variation": self.max_variation,
            "witness": self.witness.to_dict() if self.witness else None,
            "median_dim": self.profile.median_dim() if self.profile is not None else None,
            "purity": [{"r": r, "purity": p} for r, p in self.purity],
            "purity_break": self.purity_break,
        }


@dataclass(frozen=True)
class RegularizationReport:
    epsilon: float
    lam: float
    verdicts: tuple

    @property
    def passed(self):
        return bool(self.verdicts) and all(v.outcome is Outcome.PASS for v in self.verdicts)

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "lambda": self.lam,
            "passed": self.passed,
            "exceptional": [v.to_dict() for v in self.verdicts],
        }


def exceptional_distances(blownup: BlownUpCloud, index: int):
    """Blown-up distances from one divisor point to every lifted and divisor point."""
    rep = blownup.exceptional_dirs[index]
    to_lifted = blowup_distances(blownup.bases, blownup.dirs, blownup.center, rep, blownup.lam)
    to_divisor = blownup.lam * projective_distances(blownup.exceptional_dirs, rep)
    return to_lifted, to_divisor


def _purity(radii, to_lifted, lifted_cluster, to_divisor, divisor_cluster, index, own):
    others = np.ones(len(to_divisor), dtype=bool)
    others[index] = False
    dists = np.concatenate([to_lifted, to_divisor[others]])
    same = np.concatenate([lifted_cluster == own, divisor_cluster[others] == own])
    order = np.argsort(dists, kind="stable")
    dists, same = dists[order], same[order]
    total = volumes_from_distances(dists, radii)
    matching = np.concatenate([[0], np.cumsum(same)])[total]
    return [float(m / t) if t else 1.0 for m, t in zip(matching, total)]


def check_exceptional(blownup: BlownUpCloud, index: int, params: SingularityParams,
                      grid: Optional[RadiusGrid] = None, lifted_cluster=None) -> ExceptionalVerdict:
    if lifted_cluster is None:
        lifted_cluster = blownup.lifted_clusters()
    own = int(blownup.exceptional_cluster[index])
    direction = tuple(float(x) for x in blownup.exceptional_dirs[index])
    to_lifted, to_divisor = exceptional_distances(blownup, index)
    dists = np.sort(np.concatenate([to_lifted, to_divisor]))

    r_max = params.r_max
    if r_max is None:
        r_max = float(dists[min(R_MAX_NEIGHBOR, len(dists) - 1)])
    if grid is None:
        r_min = float(dists[min(GRID_START_NEIGHBOR, len(dists) - 1)])
        try:
            grid = RadiusGrid.geometric(r_min, r_max, params.grid_size)
        except InvalidGrid:
            logger.info("exceptional point %d: no grid between %.4g and %.4g", index, r_min, r_max)
            return ExceptionalVerdict(index, own, direction, Outcome.UNDETERMINED,
                                      None, None, None, (), None)

    profile = profile_from_distances(f"exceptional-{index}", dists, grid, params.estimator, params.v_min)
    radii = grid.as_array()
    purity = _purity(radii, to_lifted, lifted_cluster, to_divisor,
                     blownup.exceptional_cluster, index, own)
    broken = [float(r) for r, p in zip(radii, purity) if p < 1.0]
    purity_pairs = tuple((float(r), p) for r, p in zip(radii, purity))

    try:
        witness = max_variation(profile, r_max)
    except NoDefinedSamples:
        outcome, witness, variation = Outcome.UNDETERMINED, None, None
    else:
        variation = witness.variation
        outcome = Outcome.PASS if variation < params.epsilon else Outcome.FAIL
    logger.info("exceptional point %d (cluster %d): %s, variation %s",
                index, own, outcome.value, variation)
    return ExceptionalVerdict(index, own, direction, outcome, variation, witness, profile,
                              purity_pairs, broken[0] if broken else None)


def regularization_check(blownup: BlownUpCloud, params: SingularityParams,
                         grid: Optional[RadiusGrid] = None, include_dense: bool = False,
                         threads: int = 1) -> RegularizationReport:
    """Dimension stability at each exceptional point of the blown-up space.

    A point passes when the widest dimension gap over its defined samples up
    to ``params.r_max`` stays below ``params.epsilon``.
    """
    lifted_cluster = blownup.lifted_clusters()
    count = len(blownup.exceptional_dirs) if include_dense else blownup.cone_size

    def work(index):
        return check_exceptional(blownup, index, params, grid, lifted_cluster)

    if threads > 1:
        with ThreadPool(threads) as pool:
            verdicts = pool.map(work, range(count))
    else:
        verdicts = [work(i) for i in range(count)]
    return RegularizationReport(params.epsilon, blownup.lam, tuple(verdicts))
