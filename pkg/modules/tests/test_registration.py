import logging

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from modules.CustomExceptions import DegenerateGeometry, PhaseError
from modules.core.RigidPose import RigidPose, apply_pose, compose_pose, invert_pose, is_rotation
from modules.pipeline.Correspondence import MODES
from modules.pipeline.Registration import RegistrationConfig, register
from modules.scenegen.Metrics import rotation_error, translation_error
from modules.scenegen.SceneGenerator import SceneSpec, generate_scene

pytestmark = pytest.mark.slow


@pytest.fixture
def reference(trivial_spec):
    return generate_scene(trivial_spec).reference


def test_identical_clouds_give_identity(reference, fast_cfg):
    result = register(reference, reference, fast_cfg)
    assert rotation_error(RigidPose.identity(), result.pose) < 1e-3
    assert translation_error(RigidPose.identity(), result.pose) < 1e-6 * np.max(pdist(reference.points))
    assert is_rotation(result.pose.rotation)


def test_same_inputs_same_result(reference, fast_cfg):
    first = register(reference, reference, fast_cfg)
    second = register(reference, reference, fast_cfg)
    np.testing.assert_array_equal(first.pose.rotation, second.pose.rotation)
    np.testing.assert_array_equal(first.pose.translation, second.pose.translation)
    np.testing.assert_array_equal(first.confidence_q, second.confidence_q)
    assert first.metrics == second.metrics


def test_trace_covers_every_phase(reference, fast_cfg):
    hp = fast_cfg.hp.with_values(refine_iters=2, conf_iters=2)
    result = register(reference, reference, fast_cfg.with_values(hp=hp))
    phases = [record.phase for record in result.trace]
    assert phases == ['coarse'] * 2 + ['fine'] * 2 + ['refine[0]'] * 2 + ['refine[1]'] * 2
    assert [record.iteration for record in result.trace[:2]] == [0, 1]
    assert all(record.losses.total >= 0 for record in result.trace)


def test_confidences_in_unit_interval(reference, fast_cfg):
    result = register(reference, reference, fast_cfg)
    for confidence in (result.confidence_q, result.confidence_r):
        assert np.all(confidence >= fast_cfg.hp.z_floor) and np.all(confidence <= 1.0)
    assert result.metrics['ent'] >= 1.0
    assert result.metrics['delta_marginal'] >= 0.0


def test_subsampled_confidences_are_spread(reference, fast_cfg):
    result = register(reference, reference, fast_cfg.with_values(n_fine=100))
    assert result.query_indices.size == 100
    conf_q, conf_r = result.full_confidence(reference.n, reference.n)
    assert conf_q.shape == (reference.n,)
    assert np.count_nonzero(conf_q == 0.0) == reference.n - 100
    np.testing.assert_array_equal(conf_r[result.reference_indices], result.confidence_r)


def test_missing_semantics_disables_prior(reference, fast_cfg, caplog):
    bare = reference.with_sem_features(None)
    with caplog.at_level(logging.WARNING):
        result = register(bare, bare, fast_cfg)
    assert "semantic features are missing" in caplog.text
    assert result.losses.sem == 0.0


def test_rotated_scene_is_recovered(rotated_spec, fast_cfg):
    pair = generate_scene(rotated_spec)
    result = register(pair.query, pair.reference, fast_cfg)
    assert rotation_error(pair.gt_pose, result.pose) < 0.1
    assert translation_error(pair.gt_pose, result.pose) < 1e-3 * pair.diameter


def test_pre_rotating_the_query_composes_with_the_pose(rotated_spec, fast_cfg, rot_z):
    pair = generate_scene(rotated_spec)
    baseline = register(pair.query, pair.reference, fast_cfg)
    offset = RigidPose(rot_z(35.0), np.array([0.2, -0.1, 0.3]))
    moved = register(apply_pose(offset, pair.query), pair.reference, fast_cfg)
    expected = compose_pose(invert_pose(offset), baseline.pose)
    assert rotation_error(expected, moved.pose) < 0.1


def test_outliers_get_low_confidence(fast_cfg):
    pair = generate_scene(SceneSpec(n_points=256, overlap_fraction=1.0, outlier_fraction=0.25,
                                    rotation_magnitude=20.0, seed=3))
    result = register(pair.query, pair.reference, fast_cfg.with_values(n_fine=256))
    outlier = pair.outlier_q[result.query_indices]
    assert result.confidence_q[~outlier].mean() > 0.5 > result.confidence_q[outlier].mean()


@pytest.mark.parametrize("mode", MODES)
def test_every_mode_runs(reference, fast_cfg, mode):
    result = register(reference, reference, fast_cfg.with_values(correspondence_mode=mode))
    assert is_rotation(result.pose.rotation)
    assert result.transport.row_map.shape == (reference.n, reference.n)


def test_collinear_clouds_fail_in_coarse_phase(collinear_cloud, fast_cfg):
    with pytest.raises(PhaseError) as error:
        register(collinear_cloud, collinear_cloud, fast_cfg)
    assert error.value.phase == 'coarse'
    assert isinstance(error.value.original, DegenerateGeometry)
    assert isinstance(error.value.__cause__, DegenerateGeometry)


def test_config_validation():
    with pytest.raises(ValueError):
        RegistrationConfig(n_fine=64, n_coarse=128)
    with pytest.raises(ValueError):
        RegistrationConfig(correspondence_mode='nearest')
    with pytest.raises(ValueError):
        RegistrationConfig(conf_init=0.0)
    assert RegistrationConfig(descriptor_scales=[1, 3]).descriptor_scales == (1.0, 3.0)
    with pytest.raises(ValueError):
        RegistrationConfig(rotation_search='X')
    with pytest.raises(ValueError):
        RegistrationConfig(pose_tolerance=0.0)
