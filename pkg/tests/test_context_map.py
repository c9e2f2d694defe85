import math

import numpy as np
import pytest

from app.geometry.context_map import (
    AggregatorKind,
    AggregatorSpec,
    ContextWindow,
    Desingularized,
    Regular,
    aggregate,
    context_map,
    context_window,
    hybrid_embed,
    hybrid_embed_sequence,
    load_aggregator,
    nearest_divisor_component,
    save_aggregator,
)
from app.geometry.core import PointCloud, projective_distance, projective_from_vector
from app.geometry.errors import ConfigError, EmptyContext, MissingContext, ZeroAggregate
from app.geometry.singularity import PointVerdict, SingularityParams, SingularLocusReport, Verdict
from app.geometry.tangent_cone import tangent_cone


@pytest.fixture()
def table():
    return PointCloud(np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 2.0, 0.0],
        [0.0, 0.0, 3.0],
        [1.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0],
    ]))


def _locus(singular_ids, size):
    verdicts = tuple(PointVerdict(i, Verdict.SINGULAR if i in singular_ids else Verdict.REGULAR)
                     for i in range(size))
    return SingularLocusReport(SingularityParams(), verdicts)


def test_context_window_truncates_at_the_edges(table):
    sequence = [1, 2, 3, 4, 5]
    window = context_window(sequence, 0, 2, table)
    assert len(window) == 2
    np.testing.assert_array_equal(window.vectors, table.points[[2, 3]])
    window = context_window(sequence, 2, 1, table)
    np.testing.assert_array_equal(window.vectors, table.points[[2, 4]])
    assert len(context_window(sequence, 2, 0, table)) == 0
    with pytest.raises(IndexError):
        context_window(sequence, 5, 1, table)
    with pytest.raises(ValueError):
        context_window(sequence, 0, -1, table)


def test_mean_aggregate_is_bitwise_permutation_invariant(rng):
    vectors = rng.standard_normal((9, 6)) * 10 ** rng.uniform(-3, 3, size=(9, 1))
    spec = AggregatorSpec.mean()
    reference = aggregate(ContextWindow.of(vectors), spec)
    for _ in range(10):
        shuffled = vectors[rng.permutation(9)]
        assert aggregate(ContextWindow.of(shuffled), spec).tobytes() == reference.tobytes()


def test_attention_aggregate_is_bitwise_permutation_invariant(rng):
    vectors = rng.standard_normal((7, 4))
    spec = AggregatorSpec.attention(rng.standard_normal(4), tau=0.5)
    reference = aggregate(ContextWindow.of(vectors), spec)
    for _ in range(10):
        shuffled = vectors[rng.permutation(7)]
        assert aggregate(ContextWindow.of(shuffled), spec).tobytes() == reference.tobytes()


def test_attention_weights_follow_the_query():
    vectors = np.array([[1.0, 0.0], [0.0, 1.0]])
    spec = AggregatorSpec.attention([10.0, 0.0], tau=1.0)
    g = aggregate(ContextWindow.of(vectors), spec)
    assert g[0] > 0.99
    assert g[0] + g[1] == pytest.approx(1.0)


def test_context_map_lands_on_the_projective_space(table):
    window = ContextWindow.of(table.points[[1, 4]])
    point = context_map(window, AggregatorSpec.mean(), n=3)
    assert point == projective_from_vector([2.0, 1.0, 0.0])
    assert point == context_map(ContextWindow.of(-3.0 * table.points[[4, 1]]), AggregatorSpec.mean())


def test_context_map_errors(table):
    with pytest.raises(EmptyContext):
        aggregate(ContextWindow.of(np.empty((0, 3))), AggregatorSpec.mean())
    with pytest.raises(ZeroAggregate):
        context_map(ContextWindow.of(table.points[[1, 5]]), AggregatorSpec.mean())


def test_aggregator_spec_validation_and_round_trip(tmp_path):
    with pytest.raises(ConfigError):
        AggregatorSpec.attention(None)
    with pytest.raises(ConfigError):
        AggregatorSpec.attention([1.0, np.nan])
    with pytest.raises(ConfigError):
        AggregatorSpec.attention([1.0], tau=0.0)
    with pytest.raises(ConfigError):
        AggregatorSpec.from_dict({"kind": "max-pool"})

    spec = AggregatorSpec.attention([0.5, -1.0, 2.0], tau=0.25)
    save_aggregator(spec, tmp_path / "agg.json")
    loaded = load_aggregator(tmp_path / "agg.json")
    assert loaded.kind is AggregatorKind.SOFTMAX_ATTENTION
    np.testing.assert_array_equal(loaded.q, spec.q)
    assert loaded.tau == 0.25
    assert AggregatorSpec.from_dict({}).kind is AggregatorKind.MEAN


def test_hybrid_embed_keeps_regular_tokens(table):
    locus = _locus({2}, len(table))
    result = hybrid_embed(1, None, locus, table, AggregatorSpec.mean())
    assert isinstance(result, Regular)
    np.testing.assert_array_equal(result.vector, table.points[1])
    with pytest.raises(IndexError):
        hybrid_embed(6, None, locus, table, AggregatorSpec.mean())


def test_hybrid_embed_desingularizes_singular_tokens(table):
    locus = _locus({2}, len(table))
    window = context_window([1, 2, 4], 1, 1, table)
    result = hybrid_embed(2, window, locus, table, AggregatorSpec.mean())
    assert isinstance(result, Desingularized)
    assert result.divisor_point == projective_from_vector([2.0, 1.0, 0.0])
    assert result.component is None
    with pytest.raises(MissingContext):
        hybrid_embed(2, context_window([2], 0, 3, table), locus, table, AggregatorSpec.mean())


def test_hybrid_embed_sequence(table):
    locus = _locus({2}, len(table))
    out = hybrid_embed_sequence([1, 2, 4, 2, 3], 1, locus, table, AggregatorSpec.mean())
    assert [type(r).__name__ for r in out] == ["Regular", "Desingularized", "Regular",
                                               "Desingularized", "Regular"]
    assert out[3].divisor_point == projective_from_vector([1.0, 1.0, 3.0])
    assert out[3].to_dict()["kind"] == "desingularized"


def test_contexts_pick_the_matching_cone_component(lattice_cross):
    s = lattice_cross.points[100]
    cone = tangent_cone(lattice_cross, s, r_loc=0.5)
    along_x = projective_from_vector([1.0, 0.02])
    along_u = projective_from_vector([0.5, math.sqrt(3) / 2 + 0.02])
    first, second = nearest_divisor_component(along_x, cone), nearest_divisor_component(along_u, cone)
    assert first != second
    assert math.degrees(projective_distance(cone.clusters[first].centroid, along_x)) < 2.0
    assert math.degrees(projective_distance(cone.clusters[second].centroid, along_u)) < 2.0
