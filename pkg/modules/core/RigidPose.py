"""RigidPose module, defines rigid transforms and their algebra

Row-vector convention throughout: a pose ``(R, t)`` maps a cloud ``X`` (points as rows) onto ``X R + 1 t^T``.
Coordinate frames are right-handed (``det R = +1``).

Usage:

    from modules.core.RigidPose import RigidPose, apply_pose, compose_pose, invert_pose
    moved = apply_pose(pose, cloud)
"""

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from modules.core.PointCloud import PointCloud

ORTHONORMAL_TOLERANCE = 1e-9
# Rotations are projected back onto SO(3) once a composition chain grows past this depth
REORTHONORMALIZE_DEPTH = 100


def nearest_rotation(matrix: np.ndarray) -> np.ndarray:
    """Projects a 3x3 matrix onto the closest proper rotation (Frobenius norm)."""
    u, _, vt = np.linalg.svd(np.asarray(matrix, dtype=np.float64))
    correction = np.diag([1.0, 1.0, np.sign(np.linalg.det(u @ vt)) or 1.0])
    return u @ correction @ vt


def is_rotation(matrix: np.ndarray, tolerance: float = ORTHONORMAL_TOLERANCE) -> bool:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (3, 3) or not np.all(np.isfinite(matrix)):
        return False
    orthonormal = np.max(np.abs(matrix.T @ matrix - np.eye(3))) <= tolerance
    return bool(orthonormal and abs(np.linalg.det(matrix) - 1.0) <= tolerance)


@dataclass(frozen=True, eq=False)
class RigidPose:
    """
    Rotation and translation of a rigid transform.

    Attributes:
        rotation (np.ndarray): 3x3 orthonormal matrix with determinant +1.
        translation (np.ndarray): 3-vector in scene units.
        depth (int): Number of compositions since the rotation was last re-orthonormalized.
    """
    rotation: np.ndarray
    translation: np.ndarray
    depth: int = field(default=0, compare=False)

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=np.float64, copy=True)
        translation = np.array(self.translation, dtype=np.float64, copy=True).reshape(-1)
        if translation.shape != (3,) or not np.all(np.isfinite(translation)):
            raise ValueError(f"translation must be a finite 3-vector, got {self.translation!r}")
        if not is_rotation(rotation):
            raise ValueError("rotation must be orthonormal with determinant +1")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, 'rotation', rotation)
        object.__setattr__(self, 'translation', translation)

    @classmethod
    def identity(cls) -> 'RigidPose':
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, rotation: np.ndarray, translation: np.ndarray) -> 'RigidPose':
        """Builds a pose from a nearly orthonormal rotation by projecting it onto SO(3) first."""
        return cls(nearest_rotation(rotation), translation)

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous form acting on row vectors ``[x, 1]``."""
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[3, :3] = self.translation
        return out

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation + self.translation

    def scaled(self, factor: float) -> 'RigidPose':
        """Same motion expressed in coordinates multiplied by ``factor``."""
        return replace(self, translation=self.translation * factor)

    def __json__(self) -> dict:
        return {
            "rotation": [float(value) for value in self.rotation.reshape(-1)],
            "translation": [float(value) for value in self.translation],
        }


def apply_pose(pose: RigidPose, cloud: Union[PointCloud, np.ndarray]):
    """
    Applies ``pose`` to a cloud: ``points R + 1 t^T``.

    :param pose: Transform to apply.
    :param cloud: A PointCloud (features are copied unchanged) or a raw ``n x 3`` array.
    :return: Same type as ``cloud``.
    """
    if isinstance(cloud, PointCloud):
        return cloud.with_points(pose.transform_points(cloud.points))
    return pose.transform_points(cloud)


def invert_pose(pose: RigidPose) -> RigidPose:
    """Returns ``(R^T, -t R^T)``, the transform undoing ``pose``."""
    rotation = pose.rotation.T
    return RigidPose(rotation, -pose.translation @ rotation, depth=pose.depth)


def compose_pose(first: RigidPose, second: RigidPose) -> RigidPose:
    """
    Composition applying ``first`` then ``second``.

    ``apply(compose(a, b), X) == apply(b, apply(a, X))``.
    """
    rotation = first.rotation @ second.rotation
    translation = first.translation @ second.rotation + second.translation
    depth = first.depth + second.depth + 1
    if depth > REORTHONORMALIZE_DEPTH:
        rotation = nearest_rotation(rotation)
        depth = 0
    return RigidPose(rotation, translation, depth=depth)
