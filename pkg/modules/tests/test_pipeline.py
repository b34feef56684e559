import math

import numpy as np
import pytest

from modules.CustomExceptions import TooFewPoints
from modules.core.HyperParams import HyperParams
from modules.core.PointCloud import PointCloud
from modules.pipeline.Correspondence import correspondences, ent
from modules.pipeline.Descriptors import compute_geometric_features, local_eigen_profile, neighbourhoods
from modules.pipeline.Sampling import fps, make_rng, subsample

HP = HyperParams()
SQUARE = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]])


def test_fps_square_diagonal():
    assert fps(SQUARE, 2, start=0) == [0, 2]


def test_fps_full_permutation(blob_points):
    chosen = fps(blob_points, len(blob_points))
    assert sorted(chosen) == list(range(len(blob_points)))


def test_fps_ties_go_to_lowest_index():
    assert fps(SQUARE, 3, start=0)[2] == 1
    with pytest.raises(ValueError):
        fps(SQUARE, 5)


def _fps_by_exhaustive_search(points, m):
    """Recomputes every distance to the chosen set at every step."""
    centred = np.sum((points - points.mean(axis=0)) ** 2, axis=1)
    chosen = [int(np.argmax(centred))]
    while len(chosen) < m:
        best, best_distance = None, -1.0
        for index in range(len(points)):
            if index in chosen:
                continue
            distance = min(np.sum((points - points[other]) ** 2, axis=1)[index] for other in chosen)
            if distance > best_distance:
                best, best_distance = index, distance
        chosen.append(best)
    return chosen


def test_fps_matches_exhaustive_search(rng):
    for _ in range(50):
        points = rng.normal(size=(int(rng.integers(5, 40)), 3))
        m = int(rng.integers(1, len(points) + 1))
        assert fps(points, m) == _fps_by_exhaustive_search(points, m)


def test_subsample_is_seeded_and_sorted(blob_points):
    cloud = PointCloud(blob_points)
    first = subsample(cloud, 20, make_rng(3))
    second = subsample(cloud, 20, make_rng(3))
    np.testing.assert_array_equal(first, second)
    assert np.all(np.diff(first) > 0)
    np.testing.assert_array_equal(subsample(cloud, 1000, make_rng(3)), np.arange(len(blob_points)))


def _uniform_ball(count, rng):
    points = rng.uniform(-1.0, 1.0, size=(3 * count, 3))
    return points[np.linalg.norm(points, axis=1) <= 1.0][:count]


def test_planar_profile(rng):
    points = np.column_stack([rng.uniform(size=(200, 2)), np.zeros(200)])
    _, indices = neighbourhoods(points, 16)
    profile = local_eigen_profile(points, indices)
    assert np.all(profile[:, 2] < 1e-6)
    np.testing.assert_allclose(profile.sum(axis=1), 1.0)


def test_ball_profile_is_isotropic(rng):
    points = _uniform_ball(4000, rng)
    _, indices = neighbourhoods(points, 256)
    center = int(np.argmin(np.linalg.norm(points, axis=1)))
    profile = local_eigen_profile(points, indices)[center]
    assert profile[0] / profile[2] < 2.0


def test_descriptors_are_rigid_invariant(rng, rot_z):
    points = rng.normal(size=(150, 3)) * np.array([1.0, 0.5, 0.2])
    cloud = compute_geometric_features(PointCloud(points), k=16)
    moved = compute_geometric_features(PointCloud(points @ rot_z(63) + 4.0), k=16)
    np.testing.assert_allclose(cloud.geom_features, moved.geom_features, atol=1e-8)
    np.testing.assert_allclose(np.linalg.norm(cloud.geom_features, axis=1), 1.0)
    assert cloud.d_g == 8


def test_descriptors_need_enough_points():
    with pytest.raises(TooFewPoints):
        compute_geometric_features(PointCloud(np.random.default_rng(0).normal(size=(10, 3))), k=16)
    with pytest.raises(ValueError):
        compute_geometric_features(PointCloud(SQUARE), k=2)


def test_argmax_mode_ties_lowest_index():
    log_k = np.array([[2.0, 2.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 5.0]])
    maps = correspondences(log_k, np.ones(3), np.ones(3), 'argmax', HP)
    np.testing.assert_array_equal(maps.row_map, [[1, 0, 0], [1, 0, 0], [0, 0, 1]])
    np.testing.assert_array_equal(maps.col_map, [[1, 0, 0], [1, 0, 0], [0, 0, 1]])


def test_softmax_mode():
    log_k = np.log(np.array([[1.0, 3.0], [2.0, 2.0]]))
    maps = correspondences(log_k, np.ones(2), np.ones(2), 'softmax', HP)
    np.testing.assert_allclose(maps.row_map, [[0.25, 0.75], [0.5, 0.5]])
    np.testing.assert_allclose(maps.col_map, [[1 / 3, 2 / 3], [0.6, 0.4]])


def test_ot_modes(rng):
    log_k = rng.normal(size=(5, 5))
    uniform = correspondences(log_k, np.full(5, 0.3), np.full(5, 0.3), 'uniform_ot', HP)
    np.testing.assert_allclose(uniform.plan.sum(axis=0), 1.0)
    weights = np.array([0.5, 1.5, 1.0, 1.0, 1.0])
    weighted = correspondences(log_k, weights, weights, 'confidence_ot', HP)
    np.testing.assert_allclose(weighted.plan.sum(axis=0), weights)
    np.testing.assert_allclose(weighted.row_map.sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        correspondences(log_k, weights, weights, 'hungarian', HP)


def test_ent():
    assert ent(np.eye(4)) == pytest.approx(1.0)
    assert ent(np.full((3, 256), 1 / 256)) == pytest.approx(256.0)
    row = np.zeros((1, 10))
    row[0, :2] = 0.5
    assert ent(row) == pytest.approx(2.0)
    assert math.isfinite(ent(np.full((2, 2), 0.5)))


@pytest.mark.parametrize("mode", ['uniform_ot', 'confidence_ot'])
def test_symmetric_ot_modes_swap_with_the_clouds(rng, mode):
    log_k = rng.normal(scale=3.0, size=(6, 4))
    w_row = rng.uniform(0.5, 1.5, size=6)
    w_col = rng.uniform(0.5, 1.5, size=4)
    w_col *= w_row.sum() / w_col.sum()
    forward = correspondences(log_k, w_row, w_col, mode, HP, symmetric=True)
    backward = correspondences(log_k.T, w_col, w_row, mode, HP, symmetric=True)
    np.testing.assert_allclose(forward.row_map, backward.col_map, rtol=1e-12)
    np.testing.assert_allclose(forward.col_map, backward.row_map, rtol=1e-12)
