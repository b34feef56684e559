"""
Losses Module

Confidence-weighted consistency losses and pseudo-confidence labels. Nothing here is differentiated: the losses are
diagnostics of an iteration and the kernels double as the label engine of the confidence fixed point.

Each loss sums a query-side and a reference-side term, each divided by that side's own point count:

    L = (1/n_p) sum_i w_p[i] (1 - phi(...)_p[i]) + (1/n_q) sum_j w_q[j] (1 - phi(...)_q[j])

Functions:
    loss_cycl, loss_pose, loss_sem, loss_conf: The four losses.
    pseudo_confidence(...): Clamped pseudo-labels ``z_p, z_q``.
    consistency_report(...): All kernel values of both sides at once.
    loss_breakdown(...): Every loss plus the weighted total.
    report_losses(...): The same breakdown read off a consistency report.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from modules.CustomExceptions import MissingFeatures
from modules.core.ConfidenceState import ConfidenceState
from modules.core.HyperParams import HyperParams
from modules.core.PointCloud import PointCloud
from modules.core.RigidPose import RigidPose, invert_pose
from modules.core.TransportPlan import TransportPlan
from modules.kernels.Kernels import phi_cycl, phi_pose, phi_sem

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, PointCloud]
Weights = Union[np.ndarray, ConfidenceState]


def _points(cloud: ArrayLike) -> np.ndarray:
    return cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)


def _weights(state: Weights) -> np.ndarray:
    return state.weights if isinstance(state, ConfidenceState) else np.asarray(state, dtype=np.float64).reshape(-1)


def _side_mean(weights: np.ndarray, kernel: np.ndarray) -> float:
    return float(np.sum(weights * (1.0 - kernel)) / kernel.shape[0])


@dataclass(frozen=True, eq=False)
class SideConsistency:
    """Kernel values of one side; ``pseudo_labels`` is their clamped product."""
    phi_cycl: np.ndarray
    phi_pose: np.ndarray
    phi_sem: np.ndarray
    pseudo_labels: np.ndarray


@dataclass(frozen=True, eq=False)
class ConsistencyReport:
    query: SideConsistency
    reference: SideConsistency


@dataclass(frozen=True)
class LossBreakdown:
    """
    Attributes:
        cycl, pose, sem, conf (float): Individual losses, >= 0.
        total (float): ``gamma_cycl cycl + gamma_pose pose + gamma_sem sem + gamma_conf conf``.
    """
    cycl: float
    pose: float
    sem: float
    conf: float
    total: float

    @classmethod
    def combine(cls, cycl: float, pose: float, sem: float, conf: float, hp: HyperParams) -> 'LossBreakdown':
        total = hp.gamma_cycl * cycl + hp.gamma_pose * pose + hp.gamma_sem * sem + hp.gamma_conf * conf
        return cls(float(cycl), float(pose), float(sem), float(conf), float(total))

    def __json__(self):
        return {"cycl": self.cycl, "pose": self.pose, "sem": self.sem, "conf": self.conf, "total": self.total}


def reconstructions(P: ArrayLike, Q: ArrayLike, maps: TransportPlan) -> Tuple[np.ndarray, np.ndarray]:
    """Cycle reconstructions ``P_rec = M_pq M_qp P`` and ``Q_rec = M_qp M_pq Q``."""
    p_points, q_points = _points(P), _points(Q)
    return maps.row_map @ (maps.col_map @ p_points), maps.col_map @ (maps.row_map @ q_points)


def predictions(P: ArrayLike, Q: ArrayLike, pose: RigidPose) -> Tuple[np.ndarray, np.ndarray]:
    """``P_pred`` (query moved into the reference frame) and ``Q_pred`` (reference moved into the query frame)."""
    return pose.transform_points(_points(P)), invert_pose(pose).transform_points(_points(Q))


def loss_cycl(P: ArrayLike, Q: ArrayLike, maps: TransportPlan, w_p: Weights, w_q: Weights,
              hp: HyperParams) -> float:
    """Cycle-consistency loss: a point mapped to the other view and back should land on itself."""
    p_rec, q_rec = reconstructions(P, Q, maps)
    return (_side_mean(_weights(w_p), phi_cycl(_points(P), p_rec, hp.alpha_g))
            + _side_mean(_weights(w_q), phi_cycl(_points(Q), q_rec, hp.alpha_g)))


def loss_pose(P: ArrayLike, Q: ArrayLike, pose: RigidPose, w_p: Weights, w_q: Weights, hp: HyperParams,
              nn_method: str = "brute") -> float:
    """Confidence-weighted Chamfer loss of ``pose``, evaluated in both frames."""
    p_pred, q_pred = predictions(P, Q, pose)
    return (_side_mean(_weights(w_p), phi_pose(_points(P), q_pred, hp.alpha_g, method=nn_method))
            + _side_mean(_weights(w_q), phi_pose(_points(Q), p_pred, hp.alpha_g, method=nn_method)))


def loss_sem(maps: TransportPlan, S_p: Optional[np.ndarray], S_q: Optional[np.ndarray], w_p: Weights, w_q: Weights,
             hp: HyperParams) -> float:
    """
    Semantic consistency loss of the soft maps.

    :raises MissingFeatures: One of the semantic feature matrices is absent.
    """
    if S_p is None or S_q is None:
        raise MissingFeatures("semantic consistency needs semantic features on both clouds")
    return (_side_mean(_weights(w_p), phi_sem(maps.row_map, S_p, S_q, hp.alpha_f))
            + _side_mean(_weights(w_q), phi_sem(maps.col_map, S_q, S_p, hp.alpha_f)))


def binary_cross_entropy(c: np.ndarray, z: np.ndarray, clamp: float = 1e-7) -> float:
    """Mean BCE of predictions ``c`` against targets ``z``, both clamped to ``[clamp, 1 - clamp]``."""
    c = np.clip(np.asarray(c, dtype=np.float64), clamp, 1.0 - clamp)
    z = np.clip(np.asarray(z, dtype=np.float64), clamp, 1.0 - clamp)
    return float(-np.mean(z * np.log(c) + (1.0 - z) * np.log1p(-c)))


def loss_conf(c: Union[np.ndarray, Sequence[np.ndarray]], z: Union[np.ndarray, Sequence[np.ndarray]],
              clamp: float = 1e-7) -> float:
    """
    BCE between confidences and pseudo-labels, summed over sides.

    ``c`` and ``z`` are either one vector each or matching sequences of per-side vectors. ``z`` is read only.
    """
    if isinstance(c, np.ndarray) and c.ndim == 1:
        c, z = [c], [z]
    if len(c) != len(z):
        raise ValueError("confidences and labels must cover the same sides")
    return float(sum(binary_cross_entropy(c_side, z_side, clamp) for c_side, z_side in zip(c, z)))


def _side(points: np.ndarray, rec: np.ndarray, other_pred: np.ndarray, soft_map: np.ndarray,
          own_sem: Optional[np.ndarray], other_sem: Optional[np.ndarray], hp: HyperParams,
          nn_method: str) -> SideConsistency:
    cycl = phi_cycl(points, rec, hp.alpha_g)
    pose = phi_pose(points, other_pred, hp.alpha_g, method=nn_method)
    if own_sem is None or other_sem is None:
        sem = np.ones(points.shape[0])
    else:
        sem = phi_sem(soft_map, own_sem, other_sem, hp.alpha_f)
    labels = np.clip(cycl * pose * sem, hp.z_floor, 1.0)
    return SideConsistency(cycl, pose, sem, labels)


def consistency_report(P: ArrayLike, Q: ArrayLike, maps: TransportPlan, pose: RigidPose,
                       S_p: Optional[np.ndarray], S_q: Optional[np.ndarray], hp: HyperParams,
                       nn_method: str = "brute") -> ConsistencyReport:
    """Kernel values and pseudo-labels of both sides. An absent semantic channel contributes a factor of 1."""
    p_points, q_points = _points(P), _points(Q)
    p_rec, q_rec = reconstructions(p_points, q_points, maps)
    p_pred, q_pred = predictions(p_points, q_points, pose)
    return ConsistencyReport(
        _side(p_points, p_rec, q_pred, maps.row_map, S_p, S_q, hp, nn_method),
        _side(q_points, q_rec, p_pred, maps.col_map, S_q, S_p, hp, nn_method),
    )


def pseudo_confidence(P: ArrayLike, Q: ArrayLike, maps: TransportPlan, pose: RigidPose,
                      S_p: Optional[np.ndarray], S_q: Optional[np.ndarray], hp: HyperParams,
                      nn_method: str = "brute") -> Tuple[np.ndarray, np.ndarray]:
    """
    Pseudo-confidence labels ``z = phi_cycl * phi_pose * phi_sem`` per side, clamped to ``[z_floor, 1]``.

    Returns:
        Tuple[np.ndarray, np.ndarray]: ``(z_p, z_q)``.
    """
    report = consistency_report(P, Q, maps, pose, S_p, S_q, hp, nn_method=nn_method)
    return report.query.pseudo_labels, report.reference.pseudo_labels


def loss_breakdown(P: ArrayLike, Q: ArrayLike, maps: TransportPlan, pose: RigidPose,
                   c_p: ConfidenceState, c_q: ConfidenceState, z_p: np.ndarray, z_q: np.ndarray,
                   S_p: Optional[np.ndarray], S_q: Optional[np.ndarray], hp: HyperParams,
                   nn_method: str = "brute") -> LossBreakdown:
    """All four losses of one iteration. The semantic loss is 0 when a semantic channel is absent."""
    cycl = loss_cycl(P, Q, maps, c_p, c_q, hp)
    pose_loss = loss_pose(P, Q, pose, c_p, c_q, hp, nn_method=nn_method)
    sem = 0.0 if S_p is None or S_q is None else loss_sem(maps, S_p, S_q, c_p, c_q, hp)
    conf = loss_conf([c_p.confidence, c_q.confidence], [z_p, z_q], clamp=hp.bce_clamp)
    breakdown = LossBreakdown.combine(cycl, pose_loss, sem, conf, hp)
    logger.debug(f"losses cycl={breakdown.cycl:.4g} pose={breakdown.pose:.4g} sem={breakdown.sem:.4g} "
                 f"conf={breakdown.conf:.4g} total={breakdown.total:.4g}")
    return breakdown


def report_losses(report: ConsistencyReport, c_p: ConfidenceState, c_q: ConfidenceState, hp: HyperParams,
                  semantic: bool = True) -> LossBreakdown:
    """
    Same values as :func:`loss_breakdown` for the maps and pose ``report`` was computed from, reusing its kernels.
    The labels are the report's pseudo-labels; ``semantic=False`` zeroes the semantic loss.
    """
    query, reference = report.query, report.reference
    w_p, w_q = _weights(c_p), _weights(c_q)
    cycl = _side_mean(w_p, query.phi_cycl) + _side_mean(w_q, reference.phi_cycl)
    pose_loss = _side_mean(w_p, query.phi_pose) + _side_mean(w_q, reference.phi_pose)
    sem = _side_mean(w_p, query.phi_sem) + _side_mean(w_q, reference.phi_sem) if semantic else 0.0
    conf = loss_conf([c_p.confidence, c_q.confidence], [query.pseudo_labels, reference.pseudo_labels],
                     clamp=hp.bce_clamp)
    return LossBreakdown.combine(cycl, pose_loss, sem, conf, hp)
