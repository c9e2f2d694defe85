import math

import numpy as np
import pytest

from app.geometry.core import (
    BlowupPoint,
    PointCloud,
    RadiusGrid,
    blowup_distance,
    blowup_distances,
    canonical_rows,
    projective_distance,
    projective_distances,
    projective_from_vector,
    range_count,
    scan_range_count,
)
from app.geometry.errors import (
    DimensionMismatch,
    InvalidCloud,
    InvalidGrid,
    NonPositiveScale,
    ZeroVector,
)


def test_canonical_rows_are_unit_with_positive_leading_coordinate():
    reps = canonical_rows([[-1.0, 2.0], [0.0, -3.0], [-4.0, 4.0]])
    np.testing.assert_allclose(np.linalg.norm(reps, axis=1), 1.0)
    np.testing.assert_allclose(reps[0], np.array([1.0, -2.0]) / math.sqrt(5), atol=1e-9)
    np.testing.assert_allclose(reps[1], [0.0, 1.0])
    assert reps[2][0] > 0


def test_canonical_rows_rejects_zero_vector():
    with pytest.raises(ZeroVector):
        canonical_rows([[0.0, 0.0]])


def test_projective_point_ignores_scale_and_sign():
    v = np.array([3.0, -4.0, 12.0])
    assert projective_from_vector(v) == projective_from_vector(-3.0 * v)
    assert projective_from_vector(v) == projective_from_vector(0.5 * v)
    assert hash(projective_from_vector(v)) == hash(projective_from_vector(-v))


def test_projective_from_vector_errors():
    with pytest.raises(ZeroVector):
        projective_from_vector([0.0, 0.0, 0.0])
    with pytest.raises(DimensionMismatch):
        projective_from_vector([1.0, 2.0], n=3)


def test_projective_distance_values():
    e1 = projective_from_vector([1.0, 0.0])
    e2 = projective_from_vector([0.0, 1.0])
    diag = projective_from_vector([1.0, 1.0])
    assert projective_distance(e1, e1) == 0.0
    assert projective_distance(e1, projective_from_vector([-2.0, 0.0])) == 0.0
    assert projective_distance(e1, e2) == pytest.approx(math.pi / 2)
    assert projective_distance(e1, diag) == pytest.approx(math.pi / 4)
    with pytest.raises(DimensionMismatch):
        projective_distance(e1, projective_from_vector([1.0, 0.0, 0.0]))


def test_projective_distance_is_a_metric_on_samples(rng):
    reps = canonical_rows(rng.standard_normal((30, 4)))
    d = np.stack([projective_distances(reps, r) for r in reps])
    np.testing.assert_allclose(d, d.T, atol=1e-12)
    assert np.all(d <= math.pi / 2 + 1e-12)
    for i in range(10):
        for j in range(10):
            assert np.all(d[i, j] <= d[i, :] + d[:, j] + 1e-9)


def test_projective_distance_keeps_small_angles():
    a = projective_from_vector([1.0, 0.0])
    b = projective_from_vector([1.0, 1e-6])
    assert projective_distance(a, b) == pytest.approx(1e-6, rel=1e-3)


def test_blowup_distance():
    a = BlowupPoint(np.zeros(2), projective_from_vector([1.0, 0.0]))
    b = BlowupPoint(np.zeros(2), projective_from_vector([0.0, 1.0]))
    c = BlowupPoint(np.array([3.0, 4.0]), projective_from_vector([1.0, 0.0]))
    assert blowup_distance(a, b, 2.0) == pytest.approx(math.pi)
    assert blowup_distance(a, c, 2.0) == pytest.approx(5.0)
    with pytest.raises(NonPositiveScale):
        blowup_distance(a, b, 0.0)
    many = blowup_distances(np.stack([b.base, c.base]), np.stack([b.dir.rep, c.dir.rep]),
                            a.base, a.dir.rep, 2.0)
    np.testing.assert_allclose(many, [math.pi, 5.0])



def _random_blowup_point(rng):
    return BlowupPoint(rng.standard_normal(3), projective_from_vector(rng.standard_normal(3)))


def test_blowup_distance_is_a_metric(rng):
    for _ in range(300):
        a, b, c = (_random_blowup_point(rng) for _ in range(3))
        lam = rng.uniform(0.1, 5.0)
        assert blowup_distance(a, c, lam) <= blowup_distance(a, b, lam) + blowup_distance(b, c, lam) + 1e-12
        assert blowup_distance(a, b, lam) == pytest.approx(blowup_distance(b, a, lam))
    assert blowup_distance(a, a, 1.0) == 0.0


def test_doubling_lambda_at_most_doubles_the_distance(rng):
    for _ in range(300):
        a, b = _random_blowup_point(rng), _random_blowup_point(rng)
        lam = rng.uniform(0.1, 5.0)
        near, far = blowup_distance(a, b, lam), blowup_distance(a, b, 2.0 * lam)
        assert near <= far <= 2.0 * near + 1e-12
        theta = projective_distance(a.dir, b.dir)
        assert far ** 2 - near ** 2 == pytest.approx(3.0 * (lam * theta) ** 2, abs=1e-9)

def test_radius_grid_validation():
    with pytest.raises(InvalidGrid):
        RadiusGrid((0.1, 0.2, 0.3))
    with pytest.raises(InvalidGrid):
        RadiusGrid((0.1, 0.2, 0.2, 0.3))
    with pytest.raises(InvalidGrid):
        RadiusGrid((0.0, 0.1, 0.2, 0.3))
    with pytest.raises(InvalidGrid):
        RadiusGrid.geometric(1.0, 0.5)


def test_radius_grid_geometric_endpoints():
    grid = RadiusGrid.geometric(0.01, 1.0, 16)
    assert len(grid) == 16
    assert grid.radii[0] == pytest.approx(0.01)
    assert grid.r_max == 1.0
    ratios = np.diff(np.log(grid.as_array()))
    np.testing.assert_allclose(ratios, ratios[0])


def test_point_cloud_validation():
    with pytest.raises(InvalidCloud):
        PointCloud(np.zeros(5))
    with pytest.raises(InvalidCloud):
        PointCloud(np.zeros((3, 1)))
    with pytest.raises(InvalidCloud):
        PointCloud(np.array([[0.0, np.nan]]))
    with pytest.raises(InvalidCloud):
        PointCloud(np.zeros((2, 2)), labels=("a",))


def test_point_cloud_is_read_only():
    source = np.zeros((3, 2))
    cloud = PointCloud(source)
    source[0, 0] = 5.0
    assert cloud.points[0, 0] == 0.0
    with pytest.raises(ValueError):
        cloud.points[0, 0] = 1.0


def test_neighbors_boundary_is_inclusive(lattice_disk):
    ids, dists = lattice_disk.neighbors([0.0, 0.0], 1.0)
    assert len(ids) == 5
    assert dists[0] == 0.0
    np.testing.assert_array_equal(dists[1:], 1.0)
    assert range_count(lattice_disk, [0.0, 0.0], 1.0) == 5


def test_range_count_gauss_circle(lattice_disk):
    assert range_count(lattice_disk, [0.0, 0.0], 10.0) == 317
    assert range_count(lattice_disk, [0.0, 0.0], 20.0) == 1257
    assert range_count(lattice_disk, [0.0, 0.0], 0.0) == 1


def test_range_count_matches_linear_scan(rng):
    cloud = PointCloud(rng.standard_normal((500, 5)))
    for center in (cloud.points[0], np.zeros(5), cloud.points[17] + 0.1):
        for r in (0.0, 0.5, 1.3, 2.0, 10.0):
            assert range_count(cloud, center, r) == scan_range_count(cloud, center, r)


def test_range_count_rejects_negative_radius(lattice_disk):
    with pytest.raises(ValueError):
        range_count(lattice_disk, [0.0, 0.0], -1.0)
    with pytest.raises(DimensionMismatch):
        range_count(lattice_disk, [0.0, 0.0, 0.0], 1.0)


def test_kth_neighbor_distance_skips_the_center(lattice_disk):
    assert lattice_disk.kth_neighbor_distance([0.0, 0.0], 4) == 1.0
    assert lattice_disk.kth_neighbor_distance([0.0, 0.0], 5) == pytest.approx(math.sqrt(2))


def test_subset_keeps_labels():
    cloud = PointCloud(np.arange(8.0).reshape(4, 2), labels=("a", "b", "c", "d"))
    sub = cloud.subset([3, 1])
    assert sub.labels == ("d", "b")
    np.testing.assert_array_equal(sub.points, [[6.0, 7.0], [2.0, 3.0]])


def test_canonical_rows_snap_tiny_components_to_zero():
    reps = canonical_rows(np.array([[1.0, 1e-10], [1.0, 1e-8], [-1.0, 1e-10]]))
    np.testing.assert_array_equal(reps[0], [1.0, 0.0])
    np.testing.assert_array_equal(reps[2], [1.0, 0.0])
    assert 0.0 < reps[1, 1] < 2e-8
