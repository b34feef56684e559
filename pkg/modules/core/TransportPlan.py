"""TransportPlan module

Holds a transport plan ``Pi`` (``n_p x n_q``, nonnegative) together with the two row-stochastic soft maps derived
from it: ``M_pq`` sends each query point to a convex combination of reference points, ``M_qp`` the reverse.
"""

from dataclasses import dataclass

import numpy as np

ROW_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """
    Attributes:
        plan (np.ndarray): ``n_p x n_q`` nonnegative matrix.
        row_map (np.ndarray): ``n_p x n_q`` row-stochastic matrix ``M_pq``.
        col_map (np.ndarray): ``n_q x n_p`` row-stochastic matrix ``M_qp``.
    """
    plan: np.ndarray
    row_map: np.ndarray
    col_map: np.ndarray

    def __post_init__(self):
        n_p, n_q = np.shape(self.plan)
        if np.shape(self.row_map) != (n_p, n_q) or np.shape(self.col_map) != (n_q, n_p):
            raise ValueError("row_map must be n_p x n_q and col_map n_q x n_p")
        if not np.all(np.isfinite(self.plan)) or np.any(np.asarray(self.plan) < 0):
            raise ValueError("transport plan entries must be finite and nonnegative")
        for name in ('row_map', 'col_map'):
            sums = np.sum(getattr(self, name), axis=1)
            if np.any(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE):
                raise ValueError(f"{name} rows must sum to 1")
        for name in ('plan', 'row_map', 'col_map'):
            value = np.array(getattr(self, name), dtype=np.float64, copy=True)
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def shape(self):
        return self.plan.shape

    def transposed(self) -> 'TransportPlan':
        """The same correspondences seen from the reference side."""
        return TransportPlan(self.plan.T, self.col_map, self.row_map)
