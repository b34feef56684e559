"""
Umeyama Module

Confidence-weighted rigid alignment. Given paired rows ``source`` / ``target`` and weights ``w``, finds the rotation
and translation minimizing ``sum_i w_i ||source_i R + t - target_i||^2`` (no scale), in the row-vector convention.

Functions:
    weighted_umeyama(bundle): Closed-form weighted solve.
    estimate_pose(P, Q, maps, w_p, w_q): Joint solve over both correspondence directions.
    pose_objective(bundle, pose): Weighted squared residual of a pose.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from modules.CustomExceptions import DegenerateGeometry, ZeroWeight
from modules.core.ConfidenceState import ConfidenceState
from modules.core.PointCloud import PointCloud
from modules.core.RigidPose import RigidPose, invert_pose
from modules.core.TransportPlan import TransportPlan

logger = logging.getLogger(__name__)

ZERO_WEIGHT = 1e-9
# Second singular value of the weighted cross-covariance below this fraction of the first: rotation unobservable
DEGENERACY_RATIO = 1e-12


@dataclass(frozen=True, eq=False)
class CorrespondenceBundle:
    """
    Paired points with per-pair weights.

    Attributes:
        source (np.ndarray): ``m x 3``.
        target (np.ndarray): ``m x 3``.
        weights (np.ndarray): m-vector >= 0.
    """
    source: np.ndarray
    target: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        source = np.array(self.source, dtype=np.float64, copy=True)
        target = np.array(self.target, dtype=np.float64, copy=True)
        weights = np.array(self.weights, dtype=np.float64, copy=True).reshape(-1)
        if source.ndim != 2 or source.shape[1] != 3 or source.shape != target.shape:
            raise ValueError(f"source and target must both be m x 3, got {source.shape} and {target.shape}")
        if weights.shape != (source.shape[0],):
            raise ValueError("one weight per correspondence is required")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        for name, value in (('source', source), ('target', target), ('weights', weights)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    def __len__(self) -> int:
        return self.weights.shape[0]


def weighted_umeyama(bundle: CorrespondenceBundle) -> RigidPose:
    """
    Weighted least-squares rigid transform from ``bundle.source`` to ``bundle.target``.

    The cross-covariance ``H = S~^T W T~`` of the centered sets is decomposed as ``U diag(s) V^T``; the rotation is
    ``U D V^T`` with ``D = diag(1, 1, sign det(U V^T))`` so that reflections are never returned.

    :raises ZeroWeight: Every weight is <= 1e-9.
    :raises DegenerateGeometry: The weighted source points are coincident or collinear.
    """
    weights = np.where(bundle.weights > ZERO_WEIGHT, bundle.weights, 0.0)
    total = weights.sum()
    if not total > 0:
        raise ZeroWeight("all correspondence weights are zero")

    source_mean = weights @ bundle.source / total
    target_mean = weights @ bundle.target / total
    source_centered = bundle.source - source_mean
    target_centered = bundle.target - target_mean

    covariance = (source_centered * weights[:, None]).T @ target_centered / total
    u, singular, vt = np.linalg.svd(covariance)
    if not singular[0] > 0 or singular[1] < DEGENERACY_RATIO * singular[0]:
        raise DegenerateGeometry(f"weighted cross-covariance has rank < 2 (singular values {singular})")

    reflection = np.diag([1.0, 1.0, 1.0 if np.linalg.det(u @ vt) >= 0 else -1.0])
    rotation = u @ reflection @ vt
    translation = target_mean - source_mean @ rotation
    return RigidPose(rotation, translation)


def pose_objective(bundle: CorrespondenceBundle, pose: RigidPose) -> float:
    """Returns ``sum_i w_i ||s_i R + t - t_i||^2``."""
    residual = pose.transform_points(bundle.source) - bundle.target
    return float(bundle.weights @ np.sum(residual ** 2, axis=1))


def _points(cloud: Union[PointCloud, np.ndarray]) -> np.ndarray:
    return cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)


def _weights(state: Union[ConfidenceState, np.ndarray]) -> np.ndarray:
    return state.weights if isinstance(state, ConfidenceState) else np.asarray(state, dtype=np.float64)


def joint_bundle(P: Union[PointCloud, np.ndarray], Q: Union[PointCloud, np.ndarray], maps: TransportPlan,
                 w_p: Union[ConfidenceState, np.ndarray],
                 w_q: Union[ConfidenceState, np.ndarray]) -> CorrespondenceBundle:
    """Stacks both directions: source ``[P | M_qp P]``, target ``[M_pq Q | Q]``, weights ``[w_p | w_q]``."""
    p_points, q_points = _points(P), _points(Q)
    return CorrespondenceBundle(
        np.vstack([p_points, maps.col_map @ p_points]),
        np.vstack([maps.row_map @ q_points, q_points]),
        np.concatenate([_weights(w_p), _weights(w_q)]),
    )


def estimate_pose(P: Union[PointCloud, np.ndarray], Q: Union[PointCloud, np.ndarray], maps: TransportPlan,
                  w_p: Union[ConfidenceState, np.ndarray],
                  w_q: Union[ConfidenceState, np.ndarray]) -> Tuple[RigidPose, RigidPose]:
    """
    Pose from query ``P`` to reference ``Q`` from soft correspondences, solved once over both directions.

    Returns:
        Tuple[RigidPose, RigidPose]: ``(R_pq, t_pq)`` and its inverse ``(R_qp, t_qp)``.
    """
    pose = weighted_umeyama(joint_bundle(P, Q, maps, w_p, w_q))
    return pose, invert_pose(pose)
