"""
LogAffinity Module

Builds the affinity kernel between a query and a reference cloud in the log domain. The kernel combines a
geometric term and a semantic prior:

    log K[i, j] = cos(G_p[i], G_q[j]) / tau + (lambda / tau) * ln(1 + cos(S_p[i], S_q[j]) + eps)

which is ``-C / tau`` for the cost ``C = -cos_g - lambda * ln(1 + cos_s + eps)``. With ``tau = 0.01`` the
entries span several thousand nats, so the kernel is never exponentiated outside the Sinkhorn solver.

Functions:
    build_log_affinity(query, reference, hp): Geometric + semantic log-kernel.
    positional_log_affinity(query_points, reference_points, alpha_g, weight): Positional prior for the fine phase.
"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

from modules.CustomExceptions import MissingFeatures, NonFiniteInput
from modules.core.HyperParams import HyperParams
from modules.core.PointCloud import PointCloud, unit_rows

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LogAffinity:
    """
    Natural logarithm of the affinity kernel.

    Attributes:
        log_kernel (np.ndarray): ``n_p x n_q`` finite matrix.
    """
    log_kernel: np.ndarray

    def __post_init__(self):
        log_kernel = np.array(self.log_kernel, dtype=np.float64, copy=True)
        if log_kernel.ndim != 2:
            raise ValueError(f"log_kernel must be a matrix, got shape {log_kernel.shape}")
        if not np.all(np.isfinite(log_kernel)):
            raise NonFiniteInput("log-affinity contains non-finite entries")
        log_kernel.setflags(write=False)
        object.__setattr__(self, 'log_kernel', log_kernel)

    @property
    def shape(self):
        return self.log_kernel.shape

    def __add__(self, other: Union['LogAffinity', np.ndarray, float]) -> 'LogAffinity':
        other_kernel = other.log_kernel if isinstance(other, LogAffinity) else other
        return LogAffinity(self.log_kernel + other_kernel)

    def transposed(self) -> 'LogAffinity':
        return LogAffinity(self.log_kernel.T)


def cosine_matrix(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities between the rows of two feature matrices, clipped to [-1, 1]."""
    return np.clip(unit_rows(first) @ unit_rows(second).T, -1.0, 1.0)


def build_log_affinity(query: PointCloud, reference: PointCloud, hp: HyperParams) -> LogAffinity:
    """
    Geometric and semantic log-affinity between ``query`` (rows) and ``reference`` (columns).

    :param query: Cloud with geometric descriptors (and semantic features when ``hp.lambda_ > 0``).
    :param reference: Same requirements as ``query``.
    :param hp: Uses ``tau``, ``lambda_`` and ``eps_sem``.
    :raises MissingFeatures: Geometric descriptors absent, or semantic features absent while ``lambda_ > 0``.
    :raises NonFiniteInput: The resulting kernel has non-finite entries.
    """
    if query.geom_features is None or reference.geom_features is None:
        raise MissingFeatures("both clouds need geometric descriptors to build the affinity")
    if query.d_g != reference.d_g:
        raise MissingFeatures(f"descriptor dimensions differ: {query.d_g} vs {reference.d_g}")

    log_kernel = cosine_matrix(query.geom_features, reference.geom_features) / hp.tau

    if hp.lambda_ > 0:
        if query.sem_features is None or reference.sem_features is None:
            raise MissingFeatures("semantic features are required when lambda > 0")
        cos_sem = cosine_matrix(query.sem_features, reference.sem_features)
        log_kernel = log_kernel + (hp.lambda_ / hp.tau) * np.log1p(cos_sem + hp.eps_sem)

    return LogAffinity(log_kernel)


def positional_log_affinity(query_points: np.ndarray, reference_points: np.ndarray,
                            alpha_g: float, weight: float) -> LogAffinity:
    """
    Log of the positional prior ``exp(-weight * alpha_g * ||x_i - y_j||^2)``.

    Only meaningful once the query has been brought close to the reference (rotation search and fine phase).
    """
    sq_dist = cdist(np.asarray(query_points, dtype=np.float64),
                    np.asarray(reference_points, dtype=np.float64), 'sqeuclidean')
    return LogAffinity(-weight * alpha_g * sq_dist)
