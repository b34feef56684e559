"""
Correspondence Module

Turns a log-affinity into soft correspondences. Four modes are supported, the last one being the default:

* ``argmax``: one-hot rows at the largest affinity (lowest index on ties),
* ``softmax``: row-wise softmax of the log-affinity,
* ``uniform_ot``: Sinkhorn with uniform marginals,
* ``confidence_ot``: Sinkhorn with the confidence marginals.

For ``argmax`` and ``softmax`` the reverse map is computed on the transposed affinity on its own, and the stored
plan is ``diag(w_row) M_pq``. With ``symmetric=True`` the OT modes use
:func:`modules.ot.Sinkhorn.symmetric_sinkhorn`, so exchanging query and reference exchanges the two maps.
"""

import logging
from typing import Union

import numpy as np
from scipy.special import entr, softmax

from modules.core.HyperParams import HyperParams
from modules.core.TransportPlan import TransportPlan
from modules.ot.LogAffinity import LogAffinity
from modules.ot.Sinkhorn import sinkhorn, symmetric_sinkhorn, transport_plan

logger = logging.getLogger(__name__)

MODES = ('argmax', 'softmax', 'uniform_ot', 'confidence_ot')


def _one_hot_rows(log_kernel: np.ndarray) -> np.ndarray:
    out = np.zeros_like(log_kernel)
    out[np.arange(log_kernel.shape[0]), np.argmax(log_kernel, axis=1)] = 1.0
    return out


def correspondences(log_affinity: Union[LogAffinity, np.ndarray], w_row: np.ndarray, w_col: np.ndarray, mode: str,
                    hp: HyperParams, strict: bool = True, symmetric: bool = False) -> TransportPlan:
    """
    Soft correspondences between the rows and the columns of ``log_affinity``.

    :param log_affinity: ``n_p x n_q`` log-kernel.
    :param w_row: Query-side marginal weights.
    :param w_col: Reference-side marginal weights.
    :param mode: One of :data:`MODES`.
    :param hp: Uses ``sinkhorn_iters``.
    :param strict: Forwarded to :func:`modules.ot.Sinkhorn.row_normalize` for the OT modes.
    :param symmetric: Scale the OT modes independently of the Sinkhorn update order.
    :raises ValueError: Unknown mode.
    """
    log_kernel = log_affinity.log_kernel if isinstance(log_affinity, LogAffinity) else np.asarray(log_affinity)
    w_row = np.asarray(w_row, dtype=np.float64).reshape(-1)
    w_col = np.asarray(w_col, dtype=np.float64).reshape(-1)

    solve = symmetric_sinkhorn if symmetric else sinkhorn
    match mode:
        case 'argmax':
            row_map = _one_hot_rows(log_kernel)
            return TransportPlan(w_row[:, None] * row_map, row_map, _one_hot_rows(log_kernel.T))
        case 'softmax':
            row_map = softmax(log_kernel, axis=1)
            return TransportPlan(w_row[:, None] * row_map, row_map, softmax(log_kernel.T, axis=1))
        case 'uniform_ot':
            n_p, n_q = log_kernel.shape
            mass = (n_p + n_q) / 2.0
            plan = solve(log_kernel, np.full(n_p, mass / n_p), np.full(n_q, mass / n_q), hp.sinkhorn_iters)
            return transport_plan(plan, strict=strict)
        case 'confidence_ot':
            plan = solve(log_kernel, w_row, w_col, hp.sinkhorn_iters)
            return transport_plan(plan, strict=strict)
        case _:
            raise ValueError(f"unknown correspondence mode {mode!r}, expected one of {', '.join(MODES)}")


def ent(M: np.ndarray) -> float:
    """
    Effective number of tokens: ``exp`` of the mean row entropy of a row-stochastic matrix (``0 ln 0 = 0``).

    1 for one-hot rows, ``m`` for uniform rows over ``m`` columns.
    """
    M = np.asarray(M, dtype=np.float64)
    return float(np.exp(np.mean(np.sum(entr(M), axis=1))))
