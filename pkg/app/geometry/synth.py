"""Synthetic clouds with known geometry: the oracle layer of the test-suite.

All randomness comes from ``numpy.random.Generator(Philox(seed))``; Philox is
a counter-based generator whose streams are identical across platforms, so a
seed fixes the output bit for bit.

Noise convention: ``noise`` is the RMS norm of the added Gaussian vector, so
each coordinate gets standard deviation ``noise / sqrt(n)``.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import qr, subspace_angles

from app.geometry.core import PointCloud, ProjectivePoint, projective_from_vector
from app.geometry.errors import ConfigError, InfeasibleSpec, OffManifold, UnknownSingularPoint

logger = logging.getLogger(__name__)

MAX_TRIES = 1000
DEFAULT_NOISE_FRACTION = 0.01


class SynthKind(str, enum.Enum):
    AFFINE_SUBSPACE_UNION = "affine-subspace-union"
    CROSSING_LINES = "crossing-lines"
    CONE = "cone"
    SPHERE_PATCH = "sphere-patch"
    FLAT_PATCH = "flat-patch"


_SINGULAR_KINDS = (SynthKind.AFFINE_SUBSPACE_UNION, SynthKind.CROSSING_LINES, SynthKind.CONE)


@dataclass(frozen=True)
class SynthSpec:
    kind: SynthKind
    n: int
    seed: int
    dims: tuple = (2,)
    samples: tuple = (1000,)
    noise: Optional[float] = None
    radius: float = 1.0
    min_principal_angle_deg: float = 30.0
    orthogonal: bool = False
    include_center: bool = True
    opening_angle_deg: float = 45.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SynthKind(self.kind))
        dims = (1, 1) if self.kind is SynthKind.CROSSING_LINES else tuple(int(d) for d in self.dims)
        if self.kind is SynthKind.CONE:
            dims = (2,)
        samples = tuple(int(s) for s in np.broadcast_to(np.asarray(self.samples), (len(dims),)))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "samples", samples)
        if self.n < 2:
            raise ConfigError("n", f"ambient dimension must be >= 2, got {self.n}")
        if not dims or any(not 1 <= d < self.n for d in dims):
            raise ConfigError("dims", f"need 1 <= D_j < n = {self.n}, got {dims}")
        if any(s < 0 for s in samples):
            raise ConfigError("samples", "sample counts must be >= 0")
        if self.noise is not None and not self.noise >= 0:
            raise ConfigError("noise", f"must be >= 0, got {self.noise}")
        if not self.radius > 0:
            raise ConfigError("radius", f"must be > 0, got {self.radius}")
        if self.kind in (SynthKind.FLAT_PATCH, SynthKind.SPHERE_PATCH) and len(dims) != 1:
            raise ConfigError("dims", f"{self.kind.value} has exactly one component")
        if self.kind is SynthKind.SPHERE_PATCH and dims[0] + 1 > self.n:
            raise ConfigError("dims", "a D-sphere patch needs n >= D + 1")
        if self.kind is SynthKind.CONE and self.n < 3:
            raise ConfigError("n", "a cone needs n >= 3")

    @property
    def sigma(self):
        return DEFAULT_NOISE_FRACTION * self.radius if self.noise is None else float(self.noise)

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "n": self.n,
            "seed": self.seed,
            "dims": list(self.dims),
            "samples": list(self.samples),
            "noise": self.sigma,
            "radius": self.radius,
            "min_principal_angle_deg": self.min_principal_angle_deg,
            "orthogonal": self.orthogonal,
            "include_center": self.include_center,
            "opening_angle_deg": self.opening_angle_deg,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown synth field")
        for key in ("dims", "samples"):
            if key in data:
                value = data[key]
                data[key] = tuple(value) if isinstance(value, (list, tuple)) else (value,)
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError("kind", str(exc)) from None


@dataclass(frozen=True, eq=False)
class Component:
    """One branch: a linear subspace through ``origin`` or a circular cone."""

    dim: int
    basis: np.ndarray
    origin: np.ndarray
    shape: str = "subspace"
    opening_angle: Optional[float] = None

    def distance(self, x):
        y = np.asarray(x, dtype=np.float64) - self.origin
        coords = self.basis.T @ y
        residual = float(np.linalg.norm(y - self.basis @ coords))
        if self.shape == "subspace":
            return residual
        if self.shape == "sphere":
            return math.hypot(abs(float(np.linalg.norm(coords)) - 1.0), residual)
        h, rho = abs(float(coords[0])), float(np.linalg.norm(coords[1:]))
        off = abs(rho * math.cos(self.opening_angle) - h * math.sin(self.opening_angle))
        return math.hypot(off, residual)

    def to_dict(self):
        return {
            "shape": self.shape,
            "dim": self.dim,
            "basis": self.basis.T.tolist(),
            "origin": self.origin.tolist(),
            "opening_angle_deg": math.degrees(self.opening_angle) if self.opening_angle else None,
        }


@dataclass(frozen=True, eq=False)
class GroundTruth:
    singular_points: tuple
    components: tuple
    membership: np.ndarray
    noise: float = 0.0
    seed: Optional[int] = field(default=None)

    @property
    def bases(self):
        return [c.basis for c in self.components]

    @property
    def dims(self):
        return [c.dim for c in self.components]

    @property
    def tolerance(self):
        return 3.0 * self.noise + 1e-9

    def to_dict(self):
        return {
            "singular_points": [p.tolist() for p in self.singular_points],
            "components": [c.to_dict() for c in self.components],
            "membership": self.membership.tolist(),
            "noise": self.noise,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ComponentFrame:
    directions: tuple
    opening_angle: Optional[float] = None


def _ball(rng, count, dim, radius):
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1)[:, None]
    return g * (radius * rng.random(count) ** (1.0 / dim))[:, None]


def _axis_basis(n, start, dim):
    basis = np.zeros((n, dim))
    basis[start:start + dim, :] = np.eye(dim)
    return basis


def random_subspaces(rng, n, dims, min_angle_deg):
    """Orthonormal bases with pairwise smallest principal angle >= ``min_angle_deg``."""
    for i, a in enumerate(dims):
        for b in dims[i + 1:]:
            if a + b > n:
                raise InfeasibleSpec(f"subspaces of dims {a} and {b} must meet in R^{n}")
    threshold = math.radians(min_angle_deg)
    bases = []
    for dim in dims:
        for _ in range(MAX_TRIES):
            q, _ = qr(rng.standard_normal((n, dim)), mode="economic")
            if all(subspace_angles(q, b).min() >= threshold for b in bases):
                bases.append(q)
                break
        else:
            raise InfeasibleSpec(f"no {dim}-subspace at >= {min_angle_deg} deg after {MAX_TRIES} tries")
    return bases


def _subspace_components(spec, rng):
    origin = np.zeros(spec.n)
    if spec.kind is SynthKind.CROSSING_LINES:
        bases = [_axis_basis(spec.n, 0, 1), _axis_basis(spec.n, 1, 1)]
    elif spec.orthogonal or spec.kind is SynthKind.FLAT_PATCH:
        if sum(spec.dims) > spec.n:
            raise InfeasibleSpec(f"orthogonal components of dims {spec.dims} do not fit in R^{spec.n}")
        starts = np.concatenate([[0], np.cumsum(spec.dims)[:-1]])
        bases = [_axis_basis(spec.n, int(s), d) for s, d in zip(starts, spec.dims)]
    else:
        bases = random_subspaces(rng, spec.n, spec.dims, spec.min_principal_angle_deg)
    return [Component(d, b, origin) for d, b in zip(spec.dims, bases)]


def _sample_component(spec, component, rng, count):
    if component.shape == "subspace":
        return _ball(rng, count, component.dim, spec.radius) @ component.basis.T
    if component.shape == "sphere":
        # uniform on S^D, kept within geodesic radius spec.radius of the pole e_0
        cos_max = math.cos(min(spec.radius, math.pi))
        kept = np.empty((0, component.dim + 1))
        while len(kept) < count:
            g = rng.standard_normal((max(count, 64), component.dim + 1))
            g /= np.linalg.norm(g, axis=1)[:, None]
            kept = np.vstack([kept, g[g[:, 0] >= cos_max]])
        return kept[:count] @ component.basis.T
    alpha = component.opening_angle
    t = spec.radius * np.sqrt(rng.random(count)) * rng.choice([-1.0, 1.0], size=count)
    phi = rng.random(count) * 2.0 * math.pi
    local = np.stack([np.cos(alpha) * t,
                      np.sin(alpha) * t * np.cos(phi),
                      np.sin(alpha) * t * np.sin(phi)], axis=1)
    return local @ component.basis.T


def generate(spec: SynthSpec):
    """Sample a cloud and its ground truth; the center (if any) comes first."""
    rng = np.random.Generator(np.random.Philox(spec.seed))
    origin = np.zeros(spec.n)
    if spec.kind is SynthKind.SPHERE_PATCH:
        components = [Component(spec.dims[0], _axis_basis(spec.n, 0, spec.dims[0] + 1), origin, "sphere")]
    elif spec.kind is SynthKind.CONE:
        components = [Component(2, _axis_basis(spec.n, 0, 3), origin, "cone",
                                math.radians(spec.opening_angle_deg))]
    else:
        components = _subspace_components(spec, rng)

    singular = [origin] if spec.kind in _SINGULAR_KINDS else []
    blocks, membership = [], []
    if singular and spec.include_center:
        blocks.append(origin[None, :])
        membership.append(-1)
    sigma = spec.sigma
    for j, (component, count) in enumerate(zip(components, spec.samples)):
        points = _sample_component(spec, component, rng, count)
        if sigma > 0:
            points = points + rng.standard_normal(points.shape) * (sigma / math.sqrt(spec.n))
        blocks.append(points)
        membership.extend([j] * count)

    points = np.vstack(blocks)
    truth = GroundTruth(tuple(singular), tuple(components), np.asarray(membership, dtype=np.intp),
                        sigma, spec.seed)
    logger.info("generated %s: %d points in R^%d", spec.kind.value, len(points), spec.n)
    return PointCloud(points), truth


def oracle_dimension(truth: GroundTruth, point, scale: float = 0.0):
    """Analytic dimension at ``point``.

    Within ``scale`` of a singular point the answer is the tuple of the
    branch dimensions, since no single value applies there.
    """
    x = np.asarray(point, dtype=np.float64)
    for s in truth.singular_points:
        if float(np.linalg.norm(x - s)) <= max(scale, 1e-12):
            return tuple(sorted(c.dim for c in truth.components if c.distance(s) <= 1e-12))
    distances = [c.distance(x) for c in truth.components]
    best = int(np.argmin(distances))
    if distances[best] > truth.tolerance:
        raise OffManifold(distances[best])
    return truth.components[best].dim


def oracle_tangent_cone(truth: GroundTruth, s) -> list:
    s = np.asarray(s, dtype=np.float64)
    if not any(np.linalg.norm(s - p) <= 1e-12 for p in truth.singular_points):
        raise UnknownSingularPoint(f"{s.tolist()} is not a recorded singular point")
    frames = []
    for component in truth.components:
        if component.distance(s) > 1e-12:
            continue
        directions = tuple(projective_from_vector(v) for v in component.basis.T)
        if component.shape == "cone":
            frames.append(ComponentFrame(directions[:1], component.opening_angle))
        else:
            frames.append(ComponentFrame(directions))
    return frames


def frame_angle(frame: ComponentFrame, direction: ProjectivePoint) -> float:
    """Angle between ``direction`` and the span of a subspace frame."""
    basis = np.stack([d.rep for d in frame.directions], axis=1)
    inside = float(np.linalg.norm(basis.T @ direction.rep))
    return math.acos(min(1.0, inside))
