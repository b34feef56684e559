"""PointCloud module, defines the PointCloud value type

A point cloud is an ``n x 3`` matrix of positions (one point per row, scene units) with two optional per-point
channels: geometric descriptors ``G`` and semantic features ``S``. Feature rows are unit-normalized.

Usage:

    from modules.core.PointCloud import PointCloud
    cloud = PointCloud(points)
    cloud = cloud.with_geom_features(features)
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from modules.CustomExceptions import NonFiniteInput, TooFewPoints

MIN_POINTS = 3
UNIT_NORM_TOLERANCE = 1e-6


def _frozen(array: np.ndarray) -> np.ndarray:
    frozen = np.array(array, dtype=np.float64, copy=True)
    frozen.setflags(write=False)
    return frozen


def unit_rows(features: np.ndarray) -> np.ndarray:
    """Returns a copy of ``features`` with every row scaled to unit L2 norm (zero rows stay zero)."""
    features = np.asarray(features, dtype=np.float64)
    norms = np.linalg.norm(features, axis=1, keepdims=True)
    return np.divide(features, norms, out=np.zeros_like(features), where=norms > 0)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """
    Immutable point cloud with optional descriptor channels.

    Attributes:
        points (np.ndarray): ``n x 3`` positions, finite.
        geom_features (Optional[np.ndarray]): ``n x d_g`` unit rows, or None.
        sem_features (Optional[np.ndarray]): ``n x d_s`` unit rows, or None.
    """
    points: np.ndarray
    geom_features: Optional[np.ndarray] = field(default=None)
    sem_features: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValueError(f"points must be an n x 3 matrix, got shape {points.shape}")
        if points.shape[0] < MIN_POINTS:
            raise TooFewPoints(f"a point cloud needs at least {MIN_POINTS} points, got {points.shape[0]}")
        if not np.all(np.isfinite(points)):
            raise NonFiniteInput("point coordinates must be finite")
        object.__setattr__(self, 'points', _frozen(points))

        for channel in ('geom_features', 'sem_features'):
            features = getattr(self, channel)
            if features is None:
                continue
            features = np.asarray(features, dtype=np.float64)
            if features.ndim != 2 or features.shape[0] != points.shape[0]:
                raise ValueError(f"{channel} must have one row per point, got shape {features.shape}")
            if not np.all(np.isfinite(features)):
                raise NonFiniteInput(f"{channel} contain NaN or infinite values")
            norms = np.linalg.norm(features, axis=1)
            if features.shape[1] > 0 and np.any(np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE):
                raise ValueError(f"{channel} rows must have unit L2 norm")
            object.__setattr__(self, channel, _frozen(features))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d_g(self) -> int:
        return 0 if self.geom_features is None else self.geom_features.shape[1]

    @property
    def d_s(self) -> int:
        return 0 if self.sem_features is None else self.sem_features.shape[1]

    def with_points(self, points: np.ndarray) -> 'PointCloud':
        return replace(self, points=points)

    def with_geom_features(self, features: Optional[np.ndarray]) -> 'PointCloud':
        return replace(self, geom_features=features)

    def with_sem_features(self, features: Optional[np.ndarray]) -> 'PointCloud':
        return replace(self, sem_features=features)

    def subset(self, indices: Sequence[int]) -> 'PointCloud':
        """Returns the cloud restricted to ``indices`` (rows of every channel, in the given order)."""
        indices = np.asarray(indices, dtype=np.intp)
        return PointCloud(
            self.points[indices],
            None if self.geom_features is None else self.geom_features[indices],
            None if self.sem_features is None else self.sem_features[indices],
        )

    def scaled(self, factor: float) -> 'PointCloud':
        """Positions multiplied by ``factor``; features are scale-free and kept."""
        return replace(self, points=self.points * factor)

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def mean_radius(self) -> float:
        """Average distance of the points to their centroid."""
        return float(np.linalg.norm(self.points - self.centroid(), axis=1).mean())
