"""
Metrics Module

Pose and confidence evaluation metrics: geodesic rotation error, translation error, overlap IoU of thresholded
confidences and the ROC AUC of confidences against the overlap mask.
"""

import math

import numpy as np
from scipy.spatial.transform import Rotation
from sklearn.metrics import roc_auc_score

from modules.core.RigidPose import RigidPose

RECALL_ROTATION_DEG = 5.0
RECALL_TRANSLATION_FRACTION = 0.02
OVERLAP_THRESHOLD = 0.5


def rotation_error(a: RigidPose, b: RigidPose) -> float:
    """Geodesic angle between the rotations of ``a`` and ``b``, in degrees."""
    # quaternion angle stays accurate near zero where acos of the trace does not
    return math.degrees(float(Rotation.from_matrix(a.rotation.T @ b.rotation).magnitude()))


def translation_error(a: RigidPose, b: RigidPose) -> float:
    return float(np.linalg.norm(a.translation - b.translation))


def overlap_iou(predicted_conf: np.ndarray, gt_mask: np.ndarray, threshold: float = OVERLAP_THRESHOLD) -> float:
    """
    IoU between ``{conf > threshold}`` and ``gt_mask``; 1 when both sets are empty.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    predicted = np.asarray(predicted_conf, dtype=np.float64) > threshold
    gt_mask = np.asarray(gt_mask, dtype=bool)
    if predicted.shape != gt_mask.shape:
        raise ValueError("confidence and mask lengths differ")
    union = np.logical_or(predicted, gt_mask).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(predicted, gt_mask).sum() / union)


def confidence_auc(predicted_conf: np.ndarray, gt_mask: np.ndarray) -> float:
    """ROC AUC of confidences as an overlap detector; NaN when the mask holds a single class."""
    gt_mask = np.asarray(gt_mask, dtype=bool)
    if gt_mask.all() or not gt_mask.any():
        return float('nan')
    return float(roc_auc_score(gt_mask, np.asarray(predicted_conf, dtype=np.float64)))


def is_recalled(rot_err: float, trans_err: float, diameter: float,
                max_rotation: float = RECALL_ROTATION_DEG,
                max_translation_fraction: float = RECALL_TRANSLATION_FRACTION) -> bool:
    """A registration counts as recalled within ``max_rotation`` degrees and a diameter fraction of translation."""
    return bool(rot_err < max_rotation and trans_err < max_translation_fraction * diameter)
