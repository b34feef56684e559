"""
Sampling Module

Point subsampling used by the registration pipeline: a seeded uniform draw down to the fine resolution, and
deterministic farthest point sampling (FPS) for the coarse subsets.
"""

from typing import List, Optional

import numpy as np

from modules.core.PointCloud import PointCloud


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; every random draw of a run flows from one seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


def default_fps_start(points: np.ndarray) -> int:
    """Index of the point farthest from the centroid (lowest index on ties)."""
    points = np.asarray(points, dtype=np.float64)
    return int(np.argmax(np.sum((points - points.mean(axis=0)) ** 2, axis=1)))


def fps(points: np.ndarray, m: int, start: Optional[int] = None) -> List[int]:
    """
    Greedy farthest point sampling.

    The first index is ``start``; every next index maximizes the distance to the already chosen set. Ties go to the
    lowest index.

    Args:
        points (np.ndarray): ``n x 3`` positions.
        m (int): Number of indices to return, ``1 <= m <= n``.
        start (Optional[int]): First index; defaults to :func:`default_fps_start`.

    Returns:
        List[int]: ``m`` distinct indices in selection order.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"m must be in [1, {n}], got {m}")
    if start is None:
        start = default_fps_start(points)
    if not 0 <= start < n:
        raise ValueError(f"start must be in [0, {n}), got {start}")

    chosen = [int(start)]
    min_sq = np.sum((points - points[start]) ** 2, axis=1)
    min_sq[start] = -1.0
    for _ in range(m - 1):
        index = int(np.argmax(min_sq))
        chosen.append(index)
        min_sq = np.minimum(min_sq, np.sum((points - points[index]) ** 2, axis=1))
        min_sq[chosen] = -1.0
    return chosen


def subsample(cloud: PointCloud, n_max: int, rng: np.random.Generator) -> np.ndarray:
    """
    Indices of a uniform draw without replacement of at most ``n_max`` points, in ascending order.

    Clouds with at most ``n_max`` points are returned whole and ``rng`` is not advanced.
    """
    if cloud.n <= n_max:
        return np.arange(cloud.n)
    return np.sort(rng.choice(cloud.n, size=n_max, replace=False))
