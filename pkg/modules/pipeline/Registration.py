"""
Registration Module

This module provides the Registration class, which estimates the rigid pose mapping a query cloud onto a reference
cloud. Registration runs coarse to fine:

1. optional seeded subsampling to ``n_fine`` points and scale normalization (mean cloud radius 1),
2. geometric descriptors for clouds that do not carry them,
3. a coarse phase on farthest-point subsets of ``n_coarse`` points: the descriptor pose, then a search over the
   rotations of a finite group applied on top of it, each tracked with the positional prior and scored by nearest
   neighbour agreement with the full clouds,
4. a fine phase on the full sets starting from the coarse pose, with a positional prior,
5. ``refine_iters`` refinements, each re-running the fine phase from the current pose.

Every phase runs the confidence fixed point at least ``conf_iters`` times:
affinity -> correspondences -> pose -> pseudo-labels -> confidence.
With the positional prior the query is moved by the pose of the previous iteration, and the fine and refinement
phases keep iterating (up to ``max_fine_iters``) until the pose update is below ``pose_tolerance``.

Classes:
    RegistrationConfig: Everything a run depends on.
    Registration: Runs the pipeline for one configuration.

Usage Example:
    result = register(query, reference, RegistrationConfig(seed=7))
    moved = apply_pose(result.pose, query)
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from modules.CustomExceptions import PhaseError, RegistrationError
from modules.core.ConfidenceState import ConfidenceState
from modules.core.HyperParams import HyperParams
from modules.core.PointCloud import PointCloud
from modules.core.RigidPose import RigidPose, apply_pose, compose_pose, invert_pose
from modules.core.TransportPlan import TransportPlan
from modules.kernels.Kernels import phi_nearest
from modules.kernels.Losses import LossBreakdown, consistency_report, report_losses
from modules.ot.LogAffinity import LogAffinity, build_log_affinity, positional_log_affinity
from modules.ot.Sinkhorn import degenerate_points, marginal_residual, normalize_confidence, target_mass
from modules.pipeline.Correspondence import MODES, correspondences, ent
from modules.pipeline.Descriptors import compute_geometric_features
from modules.pipeline.Sampling import fps, make_rng, subsample
from modules.pose.Umeyama import estimate_pose

logger = logging.getLogger(__name__)

NN_METHODS = ('brute', 'kdtree')
# 'none' keeps the descriptor pose; T, O and I are the tetrahedral (12), octahedral (24) and icosahedral (60) groups
ROTATION_SEARCHES = ('none', 'T', 'O', 'I')


@dataclass(frozen=True)
class RegistrationConfig:
    """
    Attributes:
        hp (HyperParams): Numerical hyper-parameters.
        n_fine (int): Points kept per cloud for the fine phase.
        n_coarse (int): Farthest-point subset size of the coarse phase, ``<= n_fine``.
        correspondence_mode (str): One of ``argmax``, ``softmax``, ``uniform_ot``, ``confidence_ot``.
        seed (int): Seed of the subsampling draw.
        normalize_scale (bool): Work in coordinates where the mean cloud radius is 1.
        conf_init (float): Initial uniform confidence, in (0, 1].
        descriptor_k (int): Neighbourhood size of the geometric descriptors.
        descriptor_scales (Tuple[float, ...]): Neighbourhood multipliers of the descriptors.
        nn_method (str): Nearest-neighbour search of the Chamfer kernel, ``brute`` or ``kdtree``.
        warm_start_refinement (bool): Start each refinement from the previous fine-phase confidences.
        rotation_search (str): Rotation group searched around the descriptor pose, one of :data:`ROTATION_SEARCHES`.
        search_iters (int): Positional iterations tracking each rotation hypothesis, >= 1.
        max_fine_iters (int): Iteration cap of the fine phase and of every refinement.
        pose_tolerance (float): Convergence threshold on the pose update (rotation in radians, translation in
            normalized units), > 0.
        symmetric_transport (bool): Make the OT modes independent of the Sinkhorn update order.
    """
    hp: HyperParams = field(default_factory=HyperParams)
    n_fine: int = 1024
    n_coarse: int = 256
    correspondence_mode: str = 'confidence_ot'
    seed: int = 0
    normalize_scale: bool = True
    conf_init: float = 0.5
    descriptor_k: int = 32
    descriptor_scales: Tuple[float, ...] = (1.0, 2.0)
    nn_method: str = 'kdtree'
    warm_start_refinement: bool = True
    rotation_search: str = 'I'
    search_iters: int = 4
    max_fine_iters: int = 30
    pose_tolerance: float = 1e-7
    symmetric_transport: bool = True

    def __post_init__(self):
        if not 1 <= self.n_coarse <= self.n_fine:
            raise ValueError(f"n_coarse ({self.n_coarse}) must lie in [1, n_fine={self.n_fine}]")
        if self.correspondence_mode not in MODES:
            raise ValueError(f"unknown correspondence mode {self.correspondence_mode!r}")
        if not 0 < self.conf_init <= 1:
            raise ValueError(f"conf_init must lie in (0, 1], got {self.conf_init}")
        if self.nn_method not in NN_METHODS:
            raise ValueError(f"unknown nearest neighbour method {self.nn_method!r}")
        if self.rotation_search not in ROTATION_SEARCHES:
            raise ValueError(f"unknown rotation search {self.rotation_search!r}")
        if int(self.search_iters) < 1 or int(self.max_fine_iters) < 1:
            raise ValueError("search_iters and max_fine_iters must be >= 1")
        if not self.pose_tolerance > 0:
            raise ValueError(f"pose_tolerance must be > 0, got {self.pose_tolerance}")
        object.__setattr__(self, 'descriptor_scales', tuple(float(s) for s in self.descriptor_scales))

    def with_values(self, **values) -> 'RegistrationConfig':
        return replace(self, **values)

    def __json__(self) -> Dict:
        return {
            "hp": self.hp.__json__(),
            "n_fine": self.n_fine,
            "n_coarse": self.n_coarse,
            "correspondence_mode": self.correspondence_mode,
            "seed": self.seed,
            "normalize_scale": self.normalize_scale,
            "conf_init": self.conf_init,
            "descriptor_k": self.descriptor_k,
            "descriptor_scales": list(self.descriptor_scales),
            "nn_method": self.nn_method,
            "warm_start_refinement": self.warm_start_refinement,
            "rotation_search": self.rotation_search,
            "search_iters": self.search_iters,
            "max_fine_iters": self.max_fine_iters,
            "pose_tolerance": self.pose_tolerance,
            "symmetric_transport": self.symmetric_transport,
        }


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """One pass of the confidence fixed point. ``pose`` is the accumulated pose, in input units."""
    phase: str
    iteration: int
    pose: RigidPose
    delta_marginal: float
    losses: LossBreakdown
    mean_confidence_q: float
    mean_confidence_r: float

    def __json__(self) -> Dict:
        return {
            "phase": self.phase,
            "iteration": self.iteration,
            "pose": self.pose.__json__(),
            "delta_marginal": self.delta_marginal,
            "losses": self.losses.__json__(),
            "mean_confidence_q": self.mean_confidence_q,
            "mean_confidence_r": self.mean_confidence_r,
        }


@dataclass(frozen=True, eq=False)
class RegistrationResult:
    """
    Attributes:
        pose (RigidPose): Query-to-reference pose in input units.
        confidence_q (np.ndarray): Final confidence of every used query point.
        confidence_r (np.ndarray): Final confidence of every used reference point.
        transport (TransportPlan): Correspondences of the last fine-phase iteration.
        losses (LossBreakdown): Losses of the last fine-phase iteration.
        metrics (Dict[str, float]): ``ent`` and ``delta_marginal`` of the final transport.
        trace (List[IterationRecord]): Every iteration of every phase, in order.
        query_indices (np.ndarray): Rows of the input query the confidences refer to.
        reference_indices (np.ndarray): Same for the reference.
    """
    pose: RigidPose
    confidence_q: np.ndarray
    confidence_r: np.ndarray
    transport: TransportPlan
    losses: LossBreakdown
    metrics: Dict[str, float]
    trace: List[IterationRecord]
    query_indices: np.ndarray
    reference_indices: np.ndarray

    def full_confidence(self, n_query: int, n_reference: int) -> Tuple[np.ndarray, np.ndarray]:
        """Confidences spread over the input clouds; points dropped by subsampling get 0."""
        conf_q = np.zeros(n_query)
        conf_r = np.zeros(n_reference)
        conf_q[self.query_indices] = self.confidence_q
        conf_r[self.reference_indices] = self.confidence_r
        return conf_q, conf_r


@dataclass(frozen=True, eq=False)
class PhaseOutcome:
    """Last iteration of a phase; ``pose`` is accumulated from the phase start, in normalized units."""
    pose: RigidPose
    confidence_q: np.ndarray
    confidence_r: np.ndarray
    transport: TransportPlan
    losses: LossBreakdown
    query_state: ConfidenceState


class Registration(object):
    """
    Coarse-to-fine confidence-aware registration for one configuration.

    :param config: Run configuration.
    :type config: RegistrationConfig
    """
    def __init__(self, config: RegistrationConfig):
        self.__config = config
        self.__hp = config.hp
        self.__scale = 1.0
        self.__trace: List[IterationRecord] = []

    @property
    def config(self) -> RegistrationConfig:
        return self.__config

    def run(self, query: PointCloud, reference: PointCloud) -> RegistrationResult:
        """
        Registers ``query`` onto ``reference``.

        :raises PhaseError: A phase failed; the original error is kept as ``original`` and ``__cause__``.
        """
        self.__trace = []
        self.__hp = self.__resolve_hyper_params(query, reference)

        rng = make_rng(self.__config.seed)
        query_indices = subsample(query, self.__config.n_fine, rng)
        reference_indices = subsample(reference, self.__config.n_fine, rng)
        P = query.subset(query_indices)
        Q = reference.subset(reference_indices)

        self.__scale = self.__normalization_scale(P, Q)
        P = self.__describe(P.scaled(self.__scale))
        Q = self.__describe(Q.scaled(self.__scale))

        coarse = self.__run_phase('coarse', self.__coarse_phase, P, Q)
        fine = self.__run_phase('fine', self.__fine_phase, 'fine', P, Q, coarse.pose, None)

        for k in range(self.__hp.refine_iters):
            init = (fine.confidence_q, fine.confidence_r) if self.__config.warm_start_refinement else None
            fine = self.__run_phase(f'refine[{k}]', self.__fine_phase, f'refine[{k}]', P, Q, fine.pose, init)

        pose = fine.pose.scaled(1.0 / self.__scale)
        metrics = {
            "ent": ent(fine.transport.row_map),
            "delta_marginal": marginal_residual(fine.transport.plan, fine.query_state.weights),
        }
        logger.info(f"registration done mode={self.__config.correspondence_mode} ent={metrics['ent']:.4g} "
                    f"delta_marginal={metrics['delta_marginal']:.4g}")
        return RegistrationResult(pose, fine.confidence_q, fine.confidence_r, fine.transport, fine.losses, metrics,
                                  list(self.__trace), query_indices, reference_indices)

    def __resolve_hyper_params(self, query: PointCloud, reference: PointCloud) -> HyperParams:
        hp = self.__config.hp
        if hp.lambda_ > 0 and (query.sem_features is None or reference.sem_features is None):
            logger.warning(f"lambda={hp.lambda_} but semantic features are missing, running with lambda=0")
            hp = hp.with_values(lambda_=0.0)
        return hp

    def __normalization_scale(self, P: PointCloud, Q: PointCloud) -> float:
        if not self.__config.normalize_scale:
            return 1.0
        radius = (P.mean_radius() + Q.mean_radius()) / 2.0
        if not radius > 0:
            logger.warning("clouds have zero extent, scale normalization skipped")
            return 1.0
        return 1.0 / radius

    def __describe(self, cloud: PointCloud) -> PointCloud:
        if cloud.geom_features is not None:
            return cloud
        k = min(self.__config.descriptor_k, cloud.n - 1)
        return compute_geometric_features(cloud, k=k, scales=self.__config.descriptor_scales)

    def __coarse_subsets(self, P: PointCloud, Q: PointCloud) -> Tuple[PointCloud, PointCloud]:
        m = min(self.__config.n_coarse, P.n, Q.n)
        if m < self.__config.n_coarse:
            logger.debug(f"coarse subset reduced to {m} points")
        return P.subset(fps(P.points, m)), Q.subset(fps(Q.points, m))

    def __run_phase(self, phase: str, action: Callable[..., 'PhaseOutcome'], *args) -> 'PhaseOutcome':
        logger.info(f"phase={phase} mode={self.__config.correspondence_mode}")
        try:
            return action(*args)
        except RegistrationError as error:
            raise PhaseError(phase, error) from error

    def __coarse_phase(self, P: PointCloud, Q: PointCloud) -> PhaseOutcome:
        P_c, Q_c = self.__coarse_subsets(P, Q)
        affinity = build_log_affinity(P_c, Q_c, self.__hp)
        descriptor = self.__confidence_loop('coarse', P_c, Q_c, affinity, RigidPose.identity(), positional=False,
                                            init=None, max_iters=self.__hp.conf_iters)
        if self.__config.rotation_search == 'none':
            return descriptor

        best, best_score = descriptor, self.__alignment_score(descriptor.pose, P_c, Q_c, P, Q)
        init = (descriptor.confidence_q, descriptor.confidence_r)
        for index, start in enumerate(self.__hypotheses(descriptor.pose, Q_c)):
            try:
                tracked = self.__confidence_loop('search', P_c, Q_c, affinity, start, positional=True, init=init,
                                                 max_iters=self.__config.search_iters, min_iters=1, record=False)
            except RegistrationError as error:
                logger.debug(f"rotation hypothesis {index} dropped: {type(error).__name__}: {error}")
                continue
            score = self.__alignment_score(tracked.pose, P_c, Q_c, P, Q)
            if score > best_score:
                best, best_score = tracked, score
        logger.info(f"phase=coarse search={self.__config.rotation_search} score={best_score:.4g}")
        return best

    def __hypotheses(self, coarse_pose: RigidPose, Q_c: PointCloud) -> List[RigidPose]:
        """The coarse pose followed by every rotation of the search group about the reference centroid."""
        center = Q_c.points.mean(axis=0)
        # scipy rotations act on column vectors, the transpose acts on rows
        rotations = Rotation.create_group(self.__config.rotation_search).as_matrix().transpose(0, 2, 1)
        rotations = sorted(rotations, key=lambda rotation: np.linalg.norm(rotation - np.eye(3)))
        return [compose_pose(coarse_pose, RigidPose.from_matrix(rotation, center - center @ rotation))
                for rotation in rotations]

    def __alignment_score(self, pose: RigidPose, P_c: PointCloud, Q_c: PointCloud, P: PointCloud,
                          Q: PointCloud) -> float:
        """Mean nearest-neighbour agreement of both subsets with the other full cloud under ``pose``."""
        hp = self.__hp
        semantic = hp.lambda_ > 0
        forward = phi_nearest(pose.transform_points(P_c.points), Q.points, hp.alpha_g,
                              P_c.sem_features if semantic else None, Q.sem_features, hp.alpha_f)
        backward = phi_nearest(invert_pose(pose).transform_points(Q_c.points), P.points, hp.alpha_g,
                               Q_c.sem_features if semantic else None, P.sem_features, hp.alpha_f)
        return 0.5 * float(forward.mean() + backward.mean())

    def __fine_phase(self, phase: str, P: PointCloud, Q: PointCloud, start: RigidPose,
                     init: Optional[Tuple[np.ndarray, np.ndarray]]) -> PhaseOutcome:
        affinity = build_log_affinity(P, Q, self.__hp)
        max_iters = max(self.__config.max_fine_iters, self.__hp.conf_iters)
        return self.__confidence_loop(phase, P, Q, affinity, start, positional=True, init=init, max_iters=max_iters)

    def __converged(self, step: RigidPose) -> bool:
        # ||R - I||_F / sqrt(2) is the rotation angle to first order
        rotation = np.linalg.norm(step.rotation - np.eye(3)) / np.sqrt(2.0)
        tolerance = self.__config.pose_tolerance
        return rotation < tolerance and np.linalg.norm(step.translation) < tolerance

    def __confidence_loop(self, phase: str, P: PointCloud, Q: PointCloud, affinity: LogAffinity, start: RigidPose,
                          positional: bool, init: Optional[Tuple[np.ndarray, np.ndarray]], max_iters: int,
                          min_iters: Optional[int] = None, record: bool = True) -> PhaseOutcome:
        """
        Runs the confidence fixed point from ``start`` (ignored without the positional prior, where every
        iteration estimates the pose of the unmoved query).
        """
        hp = self.__hp
        mode = self.__config.correspondence_mode
        mass = target_mass(P.n, Q.n)
        min_iters = hp.conf_iters if min_iters is None else min_iters

        if init is None:
            c_p = np.full(P.n, self.__config.conf_init)
            c_q = np.full(Q.n, self.__config.conf_init)
        else:
            c_p, c_q = init

        pose = start if positional else RigidPose.identity()
        outcome = None
        for iteration in range(max_iters):
            moved = apply_pose(pose, P) if positional else P
            log_affinity = affinity
            if positional and hp.position_weight > 0:
                log_affinity = affinity + positional_log_affinity(moved.points, Q.points, hp.alpha_g,
                                                                  hp.position_weight)

            state_p = normalize_confidence(c_p, mass, floor=hp.conf_floor)
            state_q = normalize_confidence(c_q, mass, floor=hp.conf_floor)
            maps = correspondences(log_affinity, state_p.weights, state_q.weights, mode, hp, strict=False,
                                   symmetric=self.__config.symmetric_transport)

            w_p, w_q = self.__alignment_weights(phase, maps, state_p, state_q)
            step, _ = estimate_pose(moved, Q, maps, w_p, w_q)
            report = consistency_report(moved, Q, maps, step, P.sem_features, Q.sem_features, hp,
                                        nn_method=self.__config.nn_method)
            losses = report_losses(report, state_p, state_q, hp, semantic=hp.lambda_ > 0)
            delta = marginal_residual(maps.plan, state_p.weights)

            c_p, c_q = report.query.pseudo_labels, report.reference.pseudo_labels
            pose = compose_pose(pose, step) if positional else step
            if record:
                self.__trace.append(IterationRecord(
                    phase, iteration, pose.scaled(1.0 / self.__scale), delta, losses,
                    float(np.mean(c_p)), float(np.mean(c_q)),
                ))
                logger.debug(f"phase={phase} iteration={iteration} delta_marginal={delta:.4g} "
                             f"mean_conf_q={np.mean(c_p):.4g} mean_conf_r={np.mean(c_q):.4g}")
            outcome = PhaseOutcome(pose, c_p, c_q, maps, losses, state_p)
            if positional and iteration + 1 >= min_iters and self.__converged(step):
                break
        return outcome

    @staticmethod
    def __alignment_weights(phase: str, maps: TransportPlan, state_p: ConfidenceState,
                            state_q: ConfidenceState) -> Tuple[np.ndarray, np.ndarray]:
        dead_p, dead_q = degenerate_points(maps.plan)
        if not (dead_p.any() or dead_q.any()):
            return state_p.weights, state_q.weights
        logger.warning(f"phase={phase} {int(dead_p.sum())} query and {int(dead_q.sum())} reference points carry "
                       f"no transport mass, their alignment weight is set to 0")
        return np.where(dead_p, 0.0, state_p.weights), np.where(dead_q, 0.0, state_q.weights)


def register(query: PointCloud, reference: PointCloud, cfg: Optional[RegistrationConfig] = None) -> RegistrationResult:
    """Runs :class:`Registration` once with ``cfg`` (defaults when None)."""
    return Registration(cfg or RegistrationConfig()).run(query, reference)
