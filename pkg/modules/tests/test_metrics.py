import math

import numpy as np
import pytest

from modules.core.RigidPose import RigidPose
from modules.scenegen.Metrics import confidence_auc, is_recalled, overlap_iou, rotation_error, translation_error


def test_rotation_error(rot_z):
    assert rotation_error(RigidPose.identity(), RigidPose.identity()) == 0.0
    assert rotation_error(RigidPose.identity(), RigidPose(rot_z(90), np.zeros(3))) == pytest.approx(90.0)
    assert rotation_error(RigidPose(rot_z(10), np.zeros(3)), RigidPose(rot_z(-170), np.zeros(3))) == pytest.approx(
        180.0, abs=1e-5)


def test_translation_error():
    assert translation_error(RigidPose.identity(), RigidPose(np.eye(3), [3.0, 4.0, 0.0])) == pytest.approx(5.0)


def test_overlap_iou():
    mask = np.array([True, True, False, False])
    assert overlap_iou(mask.astype(float), mask) == 1.0
    assert overlap_iou((~mask).astype(float), mask) == 0.0
    assert overlap_iou(np.array([0.9, 0.1, 0.0, 0.0]), mask) == pytest.approx(0.5)
    assert overlap_iou(np.zeros(4), np.zeros(4, dtype=bool)) == 1.0
    with pytest.raises(ValueError):
        overlap_iou(np.zeros(3), mask)


def test_confidence_auc():
    mask = np.array([True, False, True, False])
    assert confidence_auc(np.array([0.9, 0.2, 0.8, 0.1]), mask) == pytest.approx(1.0)
    assert math.isnan(confidence_auc(np.ones(3), np.ones(3, dtype=bool)))


def test_recall_thresholds():
    assert is_recalled(4.9, 0.019, 1.0)
    assert not is_recalled(5.0, 0.0, 1.0)
    assert not is_recalled(0.0, 0.03, 1.0)


@pytest.mark.parametrize('degrees', [1e-7, 1e-4, 0.5])
def test_rotation_error_resolves_small_angles(rot_z, degrees):
    assert rotation_error(RigidPose.identity(), RigidPose(rot_z(degrees), np.zeros(3))) == pytest.approx(degrees, rel=1e-6)
