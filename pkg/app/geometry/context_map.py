"""Context map Phi = p o g and the hybrid embedding E'.

A singular token is not embedded as its table row; its context window is
aggregated by a permutation-invariant ``g`` and projected onto P^{n-1}, which
picks a point of the exceptional divisor over it.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.special import softmax

from app.geometry.core import (
    ZERO_TOL,
    PointCloud,
    ProjectivePoint,
    projective_distances,
    projective_from_vector,
)
from app.geometry.errors import ConfigError, EmptyContext, MissingContext, ZeroAggregate

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ContextWindow:
    position: int
    k: int
    left: np.ndarray
    right: np.ndarray

    @property
    def vectors(self):
        return np.vstack([self.left, self.right])

    def __len__(self):
        return len(self.left) + len(self.right)

    @classmethod
    def of(cls, vectors, position=0, k=None):
        """Window over explicit context vectors, all placed on the left."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        empty = np.empty((0, vectors.shape[1]))
        return cls(position, k if k is not None else len(vectors), vectors, empty)


def context_window(sequence, i: int, k: int, table: PointCloud) -> ContextWindow:
    """C(s) = {psi_{i-k}, ..., psi_{i+k}} without psi_i, truncated at the edges."""
    if k < 0:
        raise ValueError(f"window size must be >= 0, got {k}")
    if not 0 <= i < len(sequence):
        raise IndexError(f"position {i} outside a sequence of length {len(sequence)}")
    left = [int(t) for t in sequence[max(0, i - k):i]]
    right = [int(t) for t in sequence[i + 1:i + 1 + k]]
    return ContextWindow(i, k, table.points[left].reshape(-1, table.n),
                         table.points[right].reshape(-1, table.n))


class AggregatorKind(str, enum.Enum):
    MEAN = "mean"
    SOFTMAX_ATTENTION = "softmax-attention"


@dataclass(frozen=True, eq=False)
class AggregatorSpec:
    kind: AggregatorKind = AggregatorKind.MEAN
    q: Optional[np.ndarray] = None
    tau: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", AggregatorKind(self.kind))
        if not self.tau > 0:
            raise ConfigError("tau", f"must be > 0, got {self.tau}")
        if self.kind is AggregatorKind.SOFTMAX_ATTENTION:
            if self.q is None:
                raise ConfigError("q", "softmax attention needs a query vector")
            q = np.array(self.q, dtype=np.float64)
            if q.ndim != 1 or not np.all(np.isfinite(q)):
                raise ConfigError("q", "query must be a finite vector")
            q.setflags(write=False)
            object.__setattr__(self, "q", q)

    @classmethod
    def mean(cls):
        return cls(AggregatorKind.MEAN)

    @classmethod
    def attention(cls, q, tau=1.0):
        return cls(AggregatorKind.SOFTMAX_ATTENTION, q, tau)

    def to_dict(self):
        data = {"kind": self.kind.value, "tau": self.tau}
        if self.q is not None:
            data["q"] = [float(x) for x in self.q]
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(data.get("kind", "mean"), data.get("q"), float(data.get("tau", 1.0)))
        except ValueError as exc:
            raise ConfigError("kind", str(exc)) from None


def load_aggregator(path: Union[str, Path]) -> AggregatorSpec:
    with open(path, encoding="utf-8") as fh:
        return AggregatorSpec.from_dict(json.load(fh))


def save_aggregator(spec: AggregatorSpec, path: Union[str, Path]):
    Path(path).write_text(json.dumps(spec.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _canonical_order(vectors):
    # lexsort keys run last-to-first, so reverse the columns
    return np.lexsort(vectors.T[::-1])


def aggregate(window: ContextWindow, spec: AggregatorSpec):
    """Permutation-invariant summary of the context vectors.

    Summands are accumulated in lexicographic order of the vectors, so any
    reordering of the window gives the same bits.
    """
    vectors = window.vectors
    if len(vectors) == 0:
        raise EmptyContext(f"empty context window at position {window.position}")
    vectors = vectors[_canonical_order(vectors)]
    if spec.kind is AggregatorKind.MEAN:
        total = np.zeros(vectors.shape[1])
        for v in vectors:
            total = total + v
        return total / len(vectors)
    weights = softmax((vectors @ spec.q) / spec.tau)
    total = np.zeros(vectors.shape[1])
    for w, v in zip(weights, vectors):
        total = total + w * v
    return total


def context_map(window: ContextWindow, spec: AggregatorSpec, n: Optional[int] = None) -> ProjectivePoint:
    g = aggregate(window, spec)
    magnitude = float(np.linalg.norm(g))
    if magnitude < ZERO_TOL:
        raise ZeroAggregate(magnitude)
    return projective_from_vector(g, n)


@dataclass(frozen=True, eq=False)
class Regular:
    token_id: int
    vector: np.ndarray

    def to_dict(self):
        return {"token_id": self.token_id, "kind": "regular", "vector": [float(x) for x in self.vector]}


@dataclass(frozen=True, eq=False)
class Desingularized:
    token_id: int
    divisor_point: ProjectivePoint
    component: Optional[int] = None

    def to_dict(self):
        return {"token_id": self.token_id, "kind": "desingularized",
                "divisor_point": self.divisor_point.to_list(), "component": self.component}


def hybrid_embed(token_id: int, window: ContextWindow, locus, table: PointCloud,
                 spec: AggregatorSpec, cone=None):
    """E'(token): its table row when regular, Phi(context) when singular."""
    if not 0 <= token_id < len(table):
        raise IndexError(f"token {token_id} outside a table of {len(table)} rows")
    if token_id not in locus.singular_ids:
        return Regular(token_id, table.points[token_id])
    if window is None or len(window) == 0:
        raise MissingContext(token_id)
    point = context_map(window, spec, table.n)
    component = nearest_divisor_component(point, cone) if cone is not None else None
    return Desingularized(token_id, point, component)


def hybrid_embed_sequence(sequence, k: int, locus, table: PointCloud, spec: AggregatorSpec,
                          cones=None):
    """E' at every position of a token sequence; ``cones`` maps token ids to cones."""
    cones = cones or {}
    out = []
    for i, token in enumerate(sequence):
        window = context_window(sequence, i, k, table)
        out.append(hybrid_embed(int(token), window, locus, table, spec, cones.get(int(token))))
    logger.debug("embedded %d tokens, %d desingularized", len(out),
                 sum(isinstance(r, Desingularized) for r in out))
    return out


def nearest_divisor_component(point: ProjectivePoint, cone) -> int:
    """Index of the cone cluster whose centroid is nearest; ties go to the lowest index."""
    dists = projective_distances(cone.centroid_matrix(), point.rep)
    return int(np.argmin(dists))
