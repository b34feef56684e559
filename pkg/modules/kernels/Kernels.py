"""
Kernels Module

Gaussian RBF consistency kernels. Every kernel returns one value per row of its first argument, in (0, 1], equal to
1 exactly when the underlying distance term is 0.

Functions:
    phi_cycl(X, Y, alpha_g): Point-to-point geometric similarity.
    phi_pose(X, Y, alpha_g): Chamfer (nearest neighbour) similarity.
    phi_sem(M, U, V, alpha_f): Correspondence-weighted semantic similarity.
    phi_nearest(X, Y, alpha_g, U, V): Nearest-neighbour similarity with semantic agreement, scores a pose.
    nearest_sq_distances(X, Y, method): Exact squared nearest-neighbour distances.
"""

from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from modules.core.PointCloud import unit_rows

# Rows of X processed per block by the brute-force nearest-neighbour search
BRUTE_FORCE_BLOCK = 256


def _sq_distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - Y[None, :, :]
    return np.sum(diff * diff, axis=-1)


def nearest_sq_distances(X: np.ndarray, Y: np.ndarray, method: str = "brute") -> np.ndarray:
    """
    ``min_j ||X[i] - Y[j]||^2`` for every row of ``X``.

    ``method="kdtree"`` only uses the tree to pick the nearest index; the distance itself is recomputed with the
    brute-force expression, so both methods return the same minima.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape[0] < 1:
        raise ValueError("nearest neighbour search needs a non-empty target set")

    if method == "kdtree":
        _, index = cKDTree(Y).query(X, k=1)
        diff = X - Y[index]
        return np.sum(diff * diff, axis=-1)
    if method != "brute":
        raise ValueError(f"unknown nearest neighbour method {method!r}")

    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], BRUTE_FORCE_BLOCK):
        block = X[start:start + BRUTE_FORCE_BLOCK]
        out[start:start + block.shape[0]] = _sq_distances(block, Y).min(axis=1)
    return out


def phi_cycl(X: np.ndarray, Y: np.ndarray, alpha_g: float) -> np.ndarray:
    """``exp(-alpha_g ||X[i] - Y[i]||^2)`` for paired rows."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape:
        raise ValueError(f"paired point sets must have equal shapes, got {X.shape} and {Y.shape}")
    diff = X - Y
    return np.exp(-alpha_g * np.sum(diff * diff, axis=-1))


def phi_pose(X: np.ndarray, Y: np.ndarray, alpha_g: float, method: str = "brute") -> np.ndarray:
    """``exp(-alpha_g min_j ||X[i] - Y[j]||^2)``."""
    return np.exp(-alpha_g * nearest_sq_distances(X, Y, method=method))


def phi_sem(M: np.ndarray, U: np.ndarray, V: np.ndarray, alpha_f: float) -> np.ndarray:
    """``sum_j M[i, j] exp(-alpha_f (1 - cos(U[i], V[j])))`` for a row-stochastic ``M``."""
    cosine = np.clip(unit_rows(U) @ unit_rows(V).T, -1.0, 1.0)
    return np.sum(np.asarray(M, dtype=np.float64) * np.exp(-alpha_f * (1.0 - cosine)), axis=1)


def phi_nearest(X: np.ndarray, Y: np.ndarray, alpha_g: float, U: Optional[np.ndarray] = None,
                V: Optional[np.ndarray] = None, alpha_f: float = 4.0) -> np.ndarray:
    """
    ``exp(-alpha_g ||X[i] - Y[j*]||^2)`` with ``j*`` the nearest neighbour of ``X[i]`` in ``Y``, times
    ``exp(-alpha_f (1 - cos(U[i], V[j*])))`` when both semantic matrices are given.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    _, index = cKDTree(Y).query(X, k=1)
    diff = X - Y[index]
    kernel = np.exp(-alpha_g * np.sum(diff * diff, axis=-1))
    if U is None or V is None:
        return kernel
    cosine = np.clip(np.sum(unit_rows(U) * unit_rows(V)[index], axis=1), -1.0, 1.0)
    return kernel * np.exp(-alpha_f * (1.0 - cosine))
