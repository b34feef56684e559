"""
Sinkhorn Module

Log-domain Sinkhorn scaling with confidence target marginals, and the helpers around it: marginal normalization,
row-stochastic soft maps, the entropic OT objective and marginal residual diagnostics.

The update order of :func:`sinkhorn` is fixed: ``u`` (rows) then ``v`` (columns). After every call the column
marginal is therefore exact up to rounding and the row marginal is approximate; the row residual is what
``marginal_residual`` reports. :func:`symmetric_sinkhorn` averages both update orders.

Usage Example:
    state_p = normalize_confidence(c_p, target_mass(n_p, n_q))
    plan = sinkhorn(log_affinity, state_p.weights, state_q.weights, iters=2)
    m_pq, m_qp = row_normalize(plan)
"""

import logging
from typing import Tuple, Union

import numpy as np
from scipy.special import logsumexp, xlogy

from modules.CustomExceptions import DegenerateRow, MassMismatch, NonFiniteDual
from modules.core.ConfidenceState import ConfidenceState
from modules.core.TransportPlan import TransportPlan
from modules.ot.LogAffinity import LogAffinity

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-6
DEFAULT_CONFIDENCE_FLOOR = 1e-6


def _log_kernel(log_affinity: Union[LogAffinity, np.ndarray]) -> np.ndarray:
    if isinstance(log_affinity, LogAffinity):
        return log_affinity.log_kernel
    return np.asarray(log_affinity, dtype=np.float64)


def target_mass(n_p: int, n_q: int) -> float:
    """Common mass of both marginals; equals ``n`` when both clouds have ``n`` points."""
    return (n_p + n_q) / 2.0


def normalize_confidence(confidence: np.ndarray, target_mass: float,
                         floor: float = DEFAULT_CONFIDENCE_FLOOR) -> ConfidenceState:
    """
    Mean-normalizes confidences into marginal weights of total mass ``target_mass``.

    When the mean confidence is below ``floor`` the weights fall back to uniform ``target_mass / n``.

    Args:
        confidence (np.ndarray): n-vector in [0, 1].
        target_mass (float): Required sum of the weights, > 0.
        floor (float): Mean-confidence floor.

    Returns:
        ConfidenceState: confidences and their weights.
    """
    confidence = np.asarray(confidence, dtype=np.float64).reshape(-1)
    if confidence.size == 0 or not np.all(np.isfinite(confidence)):
        raise ValueError("confidence must be a non-empty finite vector")
    if np.any(confidence < 0) or np.any(confidence > 1):
        raise ValueError("confidence entries must lie in [0, 1]")
    if not target_mass > 0:
        raise ValueError(f"target_mass must be > 0, got {target_mass}")

    n = confidence.size
    total = float(confidence.sum())
    if total / n >= floor:
        return ConfidenceState(confidence, confidence * (target_mass / total), target_mass)

    logger.debug(f"Degenerate confidence (mean {total / n:.3g}), falling back to uniform marginals")
    return ConfidenceState(confidence, np.full(n, target_mass / n), target_mass, fallback=True)


def sinkhorn_duals(log_affinity: Union[LogAffinity, np.ndarray], w_row: np.ndarray, w_col: np.ndarray,
                   iters: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Dual potentials ``(u, v)`` after ``iters`` Sinkhorn updates; see :func:`sinkhorn` for the update rule and the
    errors raised.
    """
    log_k = _log_kernel(log_affinity)
    w_row = np.asarray(w_row, dtype=np.float64).reshape(-1)
    w_col = np.asarray(w_col, dtype=np.float64).reshape(-1)
    if log_k.shape != (w_row.size, w_col.size):
        raise ValueError(f"kernel shape {log_k.shape} does not match marginals ({w_row.size}, {w_col.size})")
    if int(iters) < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    if np.any(w_row <= 0) or np.any(w_col <= 0):
        raise ValueError("Sinkhorn marginals must be strictly positive")

    row_total, col_total = w_row.sum(), w_col.sum()
    if abs(row_total - col_total) > MASS_TOLERANCE * max(row_total, col_total):
        raise MassMismatch(f"row mass {row_total} differs from column mass {col_total}")

    log_w_row = np.log(w_row)
    log_w_col = np.log(w_col)
    u = np.zeros_like(w_row)
    v = np.zeros_like(w_col)

    for iteration in range(int(iters)):
        u = log_w_row - logsumexp(log_k + v[None, :], axis=1)
        if not np.all(np.isfinite(u)):
            raise NonFiniteDual(f"row dual became non-finite at iteration {iteration + 1}")
        v = log_w_col - logsumexp(log_k + u[:, None], axis=0)
        if not np.all(np.isfinite(v)):
            raise NonFiniteDual(f"column dual became non-finite at iteration {iteration + 1}")
    return u, v


def sinkhorn(log_affinity: Union[LogAffinity, np.ndarray], w_row: np.ndarray, w_col: np.ndarray,
             iters: int) -> np.ndarray:
    """
    Log-domain Sinkhorn with target marginals.

    Starting from ``u = v = 0``, alternates ``iters`` times

        u[i] = log w_row[i] - logsumexp_j(log K[i, j] + v[j])
        v[j] = log w_col[j] - logsumexp_i(log K[i, j] + u[i])

    and returns ``Pi = exp(log K + u (+) v)``.

    :param log_affinity: ``n_p x n_q`` log-kernel.
    :param w_row: Row marginal, all entries > 0.
    :param w_col: Column marginal, all entries > 0, same total as ``w_row``.
    :param iters: Number of (u, v) updates, >= 1.
    :raises MassMismatch: Marginal totals differ by more than 1e-6 relative.
    :raises NonFiniteDual: A dual variable became non-finite.
    :return: The transport plan.
    :rtype: np.ndarray
    """
    log_k = _log_kernel(log_affinity)
    u, v = sinkhorn_duals(log_k, w_row, w_col, iters)
    plan = np.exp(log_k + u[:, None] + v[None, :])
    logger.debug(f"sinkhorn iters={iters} shape={plan.shape} delta_marginal={marginal_residual(plan, w_row):.4g}")
    return plan


def symmetric_sinkhorn(log_affinity: Union[LogAffinity, np.ndarray], w_row: np.ndarray, w_col: np.ndarray,
                       iters: int) -> np.ndarray:
    """
    Sinkhorn scaling that does not depend on which side is updated first.

    Runs :func:`sinkhorn_duals` on ``K`` and on ``K^T`` (marginals swapped) and scales ``K`` with the mean of the two
    row potentials and the mean of the two column potentials, i.e. the elementwise geometric mean of both plans.
    Swapping the two sides transposes the result, so a symmetric kernel with equal marginals gives a symmetric plan.
    Neither marginal is exact after a finite number of updates; both residuals shrink as ``iters`` grows.
    """
    log_k = _log_kernel(log_affinity)
    u_rows, v_cols = sinkhorn_duals(log_k, w_row, w_col, iters)
    u_cols, v_rows = sinkhorn_duals(log_k.T, w_col, w_row, iters)
    plan = np.exp(log_k + 0.5 * (u_rows + v_rows)[:, None] + 0.5 * (v_cols + u_cols)[None, :])
    logger.debug(f"symmetric sinkhorn iters={iters} shape={plan.shape} "
                 f"delta_marginal={marginal_residual(plan, w_row):.4g}")
    return plan


def degenerate_points(plan: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Boolean masks of the rows and of the columns of ``plan`` whose sums are not positive."""
    plan = np.asarray(plan, dtype=np.float64)
    return ~(plan.sum(axis=1) > 0), ~(plan.sum(axis=0) > 0)


def _stochastic_rows(matrix: np.ndarray) -> np.ndarray:
    sums = matrix.sum(axis=1, keepdims=True)
    dead = ~(sums[:, 0] > 0)
    out = np.divide(matrix, sums, out=np.zeros_like(matrix), where=sums > 0)
    out[dead] = 1.0 / matrix.shape[1]
    return out


def row_normalize(plan: np.ndarray, strict: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """
    Derives the row-stochastic soft maps of a plan.

    ``M_pq[i, j] = Pi[i, j] / sum_k Pi[i, k]`` and ``M_qp[j, i] = Pi[i, j] / sum_k Pi[k, j]``.

    Args:
        plan (np.ndarray): Nonnegative ``n_p x n_q`` matrix.
        strict (bool): Raise on a row or column with zero mass. Otherwise such points get a uniform map row
            (the caller is expected to give them zero weight).

    Raises:
        DegenerateRow: ``strict`` and some row or column sum underflowed to 0.
    """
    plan = np.asarray(plan, dtype=np.float64)
    if np.any(plan < 0) or not np.all(np.isfinite(plan)):
        raise ValueError("plan must be finite and nonnegative")
    dead_rows, dead_cols = degenerate_points(plan)
    if strict and (dead_rows.any() or dead_cols.any()):
        raise DegenerateRow(f"{int(dead_rows.sum())} query and {int(dead_cols.sum())} reference points "
                            f"carry no transport mass")
    return _stochastic_rows(plan), _stochastic_rows(plan.T)


def transport_plan(plan: np.ndarray, strict: bool = True) -> TransportPlan:
    """Bundles a plan with its soft maps."""
    row_map, col_map = row_normalize(plan, strict=strict)
    return TransportPlan(plan, row_map, col_map)


def entropic_ot_objective(plan: np.ndarray, log_affinity: Union[LogAffinity, np.ndarray], tau: float) -> float:
    """
    ``<C, Pi> + tau * sum Pi log Pi`` with ``C = -tau log K`` and ``0 log 0 = 0``.
    """
    plan = np.asarray(plan, dtype=np.float64)
    cost = -tau * _log_kernel(log_affinity)
    return float(np.sum(cost * plan) + tau * np.sum(xlogy(plan, plan)))


def marginal_residual(plan: np.ndarray, w_row: np.ndarray) -> float:
    """
    Row-side Delta-Marginal: mean absolute deviation between achieved and target row sums,
    divided by the mean target weight (dimensionless).
    """
    w_row = np.asarray(w_row, dtype=np.float64).reshape(-1)
    deviation = np.abs(np.asarray(plan).sum(axis=1) - w_row).mean()
    return float(deviation / w_row.mean())


def column_residual(plan: np.ndarray, w_col: np.ndarray) -> float:
    """Largest relative deviation of the column sums from ``w_col``."""
    w_col = np.asarray(w_col, dtype=np.float64).reshape(-1)
    return float(np.max(np.abs(np.asarray(plan).sum(axis=0) - w_col) / w_col))
