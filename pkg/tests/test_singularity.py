import numpy as np
import pytest

from app.geometry.core import PointCloud, RadiusGrid
from app.geometry.dimension import DimensionProfile, DimensionSample, Estimator, dimensional_variation, empty_profile
from app.geometry.errors import ConfigError, NoDefinedSamples
from app.geometry.singularity import (
    SingularityParams,
    Verdict,
    classify,
    is_singular,
    max_variation,
    singular_locus,
)


def _profile(dims, point_id=0):
    radii = tuple(0.1 * 2 ** i for i in range(len(dims)))
    samples = tuple(DimensionSample(r, 100, d) for r, d in zip(radii, dims))
    return DimensionProfile(point_id, samples, RadiusGrid(radii), Estimator.regression(5))


def test_max_variation_reports_the_extreme_pair_in_radius_order():
    witness = max_variation(_profile([1.0, 1.2, 2.1, 1.9]))
    assert witness.variation == pytest.approx(1.1)
    assert witness.r1 < witness.r2
    assert (witness.dim_r1, witness.dim_r2) == (1.0, 2.1)

    falling = max_variation(_profile([2.5, 2.0, 1.0, None]))
    assert falling.r1 < falling.r2
    assert (falling.dim_r1, falling.dim_r2) == (2.5, 1.0)


def test_max_variation_respects_r_max():
    profile = _profile([1.0, 1.1, 1.2, 3.0])
    assert max_variation(profile, r_max=0.45).variation == pytest.approx(0.2)
    assert max_variation(profile).variation == pytest.approx(2.0)


def test_max_variation_needs_two_defined_samples():
    with pytest.raises(NoDefinedSamples):
        max_variation(_profile([None, 1.0, None, None]))


def test_is_singular_is_strict():
    params = SingularityParams(epsilon=0.5)
    assert is_singular(_profile([1.0, 1.5, 1.5, 1.5]), params) is None
    assert is_singular(_profile([1.0, 1.6, 1.5, 1.5]), params) is not None


def test_classify_verdicts():
    params = SingularityParams(epsilon=0.5)
    singular = classify(_profile([1.0, 2.0, 2.0, 2.0], point_id=4), params)
    assert singular.verdict is Verdict.SINGULAR
    assert singular.point_id == 4
    assert singular.witness.variation == pytest.approx(1.0)

    regular = classify(_profile([2.0, 2.1, 1.9, 2.0]), params)
    assert regular.verdict is Verdict.REGULAR
    assert regular.witness is None
    assert regular.max_variation == pytest.approx(0.2)

    undetermined = classify(_profile([None, None, 2.0, None]), params)
    assert undetermined.verdict is Verdict.UNDETERMINED
    assert undetermined.defined_samples == 1
    assert classify(empty_profile(7), params).verdict is Verdict.UNDETERMINED


def test_singularity_params_validation():
    with pytest.raises(ConfigError):
        SingularityParams(epsilon=0.0)
    with pytest.raises(ConfigError):
        SingularityParams(r_max=-1.0)
    with pytest.raises(ConfigError):
        SingularityParams(grid_size=3)
    with pytest.raises(ConfigError):
        SingularityParams(v_min=0)
    with pytest.raises(ConfigError):
        SingularityParams(r_max_policy="adaptive")


@pytest.fixture(scope="module")
def line_and_plane():
    """Lattice plane z = 0 (spacing 0.02) pierced by a lattice line on the z axis (spacing 0.001)."""
    g = np.arange(-50, 51) * 0.02
    xx, yy = np.meshgrid(g, g)
    plane = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(xx.size)])
    z = np.arange(-800, 801) * 0.001
    line = np.column_stack([np.zeros(1600), np.zeros(1600), z[z != 0]])
    cloud = PointCloud(np.vstack([plane, line]))
    origin = int(np.flatnonzero(np.all(cloud.points == 0.0, axis=1))[0])
    return cloud, origin


def test_intersection_of_line_and_plane_is_singular(line_and_plane):
    cloud, origin = line_and_plane
    params = SingularityParams(epsilon=0.4, r_max=0.8, v_min=50, estimator=Estimator.regression(5))
    report = singular_locus(cloud, params, point_ids=[origin])
    verdict = report.verdict_of(origin)
    assert verdict.verdict is Verdict.SINGULAR
    assert verdict.witness.dim_r1 < verdict.witness.dim_r2
    assert report.singular_ids == (origin,)
    assert report.witnesses[origin] is verdict.witness


def test_lattice_line_is_regular_and_thread_count_does_not_matter(lattice_line):
    params = SingularityParams(epsilon=1.0, r_max=0.5, v_min=50, estimator=Estimator.regression(5))
    ids = [200, 500, 800]
    serial, profiles = singular_locus(lattice_line, params, ids, threads=1, keep_profiles=True)
    threaded = singular_locus(lattice_line, params, ids, threads=3)
    assert serial.counts() == {"regular": 3, "singular": 0, "undetermined": 0}
    assert serial.to_dict() == threaded.to_dict()
    assert sorted(profiles) == ids


def test_singular_locus_derives_r_max_when_missing(lattice_line):
    report = singular_locus(lattice_line, SingularityParams(v_min=50), point_ids=[500])
    assert report.params.r_max == pytest.approx(2.5, abs=0.01)
    with pytest.raises(KeyError):
        report.verdict_of(3)


def test_per_point_policy_sets_a_local_r_max(lattice_line):
    params = SingularityParams(v_min=50, r_max_policy="per-point")
    report = singular_locus(lattice_line, params, point_ids=[500])
    assert report.params.r_max is None
    assert report.verdict_of(500).r_max == pytest.approx(2.5)


def test_smaller_epsilon_and_larger_r_max_keep_a_point_singular(rng):
    for _ in range(200):
        dims = [None if rng.random() < 0.2 else float(d) for d in rng.uniform(0.5, 3.0, 8)]
        profile = _profile(dims)
        epsilon, r_max = rng.uniform(0.1, 2.0), rng.choice(profile.grid.radii[1:])
        if classify(profile, SingularityParams(epsilon=epsilon, r_max=r_max)).verdict is not Verdict.SINGULAR:
            continue
        assert classify(profile, SingularityParams(epsilon=epsilon / 2, r_max=r_max)).verdict is Verdict.SINGULAR
        assert classify(profile, SingularityParams(epsilon=epsilon, r_max=profile.grid.r_max)).verdict \
            is Verdict.SINGULAR


def test_witness_matches_the_profile(line_and_plane):
    cloud, origin = line_and_plane
    params = SingularityParams(epsilon=0.4, r_max=0.8, v_min=50, estimator=Estimator.regression(5))
    report, profiles = singular_locus(cloud, params, point_ids=[origin], keep_profiles=True)
    witness = report.witnesses[origin]
    assert witness.r1 < witness.r2 <= params.r_max
    assert dimensional_variation(profiles[origin], witness.r1, witness.r2) == pytest.approx(witness.variation)
    assert witness.variation == pytest.approx(abs(witness.dim_r2 - witness.dim_r1))
