"""
Descriptors Module

Rotation- and translation-invariant per-point geometric descriptors built from local neighbourhoods.

For every point and every neighbourhood scale ``s`` the ``round(k * s)`` nearest neighbours give

* the eigenvalues of their covariance, sorted descending and divided by their sum (linearity / planarity /
  scattering profile), and
* a density term ``r / (r + r_med)`` with ``r`` the mean neighbour distance of the point and ``r_med`` the median
  of ``r`` over the cloud.

The blocks of all scales are concatenated and every row is L2-normalized.
"""

import logging
from typing import Sequence

import numpy as np
from sklearn.neighbors import NearestNeighbors

from modules.CustomExceptions import TooFewPoints
from modules.core.PointCloud import PointCloud, unit_rows

logger = logging.getLogger(__name__)

MIN_NEIGHBOURS = 4


def neighbourhoods(points: np.ndarray, k: int):
    """Distances and indices of the ``k`` nearest neighbours of every point, the point itself excluded."""
    search = NearestNeighbors(n_neighbors=k + 1, algorithm='kd_tree').fit(points)
    distances, indices = search.kneighbors(points)
    return distances[:, 1:], indices[:, 1:]


def local_eigen_profile(points: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """
    Normalized covariance eigenvalues ``(l1, l2, l3)``, ``l1 >= l2 >= l3``, ``l1 + l2 + l3 = 1``, per neighbourhood.

    Each neighbourhood is the point itself plus the rows of ``indices``. Neighbourhoods of coincident points get
    the isotropic profile ``(1/3, 1/3, 1/3)``.
    """
    points = np.asarray(points, dtype=np.float64)
    members = np.concatenate([points[:, None, :], points[indices]], axis=1)
    centered = members - members.mean(axis=1, keepdims=True)
    covariance = np.einsum('nki,nkj->nij', centered, centered) / members.shape[1]
    eigenvalues = np.clip(np.linalg.eigvalsh(covariance)[:, ::-1], 0.0, None)
    total = eigenvalues.sum(axis=1, keepdims=True)
    return np.divide(eigenvalues, total, out=np.full_like(eigenvalues, 1.0 / 3.0), where=total > 0)


def density_ratio(distances: np.ndarray) -> np.ndarray:
    radius = distances.mean(axis=1)
    median = float(np.median(radius))
    if not median > 0:
        median = 1.0
    return radius / (radius + median)


def compute_geometric_features(cloud: PointCloud, k: int = 32, scales: Sequence[float] = (1.0, 2.0)) -> PointCloud:
    """
    Returns ``cloud`` with its geometric descriptor channel filled in.

    Args:
        cloud (PointCloud): Input cloud; existing descriptors are replaced.
        k (int): Neighbourhood size at scale 1, ``4 <= k < n``.
        scales (Sequence[float]): Multipliers of ``k``; larger neighbourhoods are capped at ``n - 1``.

    Raises:
        TooFewPoints: The cloud has no more than ``k`` points.
    """
    if k < MIN_NEIGHBOURS:
        raise ValueError(f"k must be >= {MIN_NEIGHBOURS}, got {k}")
    if cloud.n <= k:
        raise TooFewPoints(f"descriptors with k={k} need more than {k} points, got {cloud.n}")
    if len(scales) == 0:
        raise ValueError("at least one descriptor scale is required")

    blocks = []
    for scale in scales:
        k_scale = int(min(cloud.n - 1, max(MIN_NEIGHBOURS, round(k * scale))))
        distances, indices = neighbourhoods(cloud.points, k_scale)
        blocks.append(local_eigen_profile(cloud.points, indices))
        blocks.append(density_ratio(distances)[:, None])

    features = unit_rows(np.hstack(blocks))
    logger.debug(f"descriptors n={cloud.n} k={k} scales={list(scales)} d_g={features.shape[1]}")
    return cloud.with_geom_features(features)
