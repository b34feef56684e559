"""
SceneGenerator Module

Synthetic scene pairs with exact ground truth. A labelled surface is sampled from a random shape, two views are cut
from it with one sorting plane so that a controlled share of the points is seen by both, the query view is moved by
the inverse of a random rigid pose, then coordinate noise, uniform outliers and noisy semantic features are added.

Shapes:
    sphere-union, box-union, parametric-blob and composite (spheres, boxes and ellipsoids mixed).

Usage Example:
    pair = generate_scene(SceneSpec(n_points=512, overlap_fraction=0.5, seed=3))
    np.allclose(apply_pose(pair.gt_pose, pair.query).points[pair.gt_overlap_q], ...)
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Tuple

import numpy as np
from scipy.spatial.distance import pdist
from scipy.spatial.transform import Rotation

from modules.CustomExceptions import InfeasibleOverlap
from modules.core.PointCloud import PointCloud, unit_rows
from modules.core.RigidPose import RigidPose, apply_pose, invert_pose
from modules.pipeline.Sampling import make_rng

logger = logging.getLogger(__name__)

SHAPES = ('sphere-union', 'box-union', 'parametric-blob', 'composite')
MAX_ATTEMPTS = 100
OVERLAP_TOLERANCE = 0.05
# Noise vectors are clipped to this many sigmas
NOISE_CLIP = 1.5
OUTLIER_BOX_MARGIN = 0.1
MAX_TRANSLATION = 0.5


@dataclass(frozen=True)
class SceneSpec:
    """
    Attributes:
        n_points (int): Points per view, outliers included.
        shape (str): One of :data:`SHAPES`.
        overlap_fraction (float): Share of the surface points of a view also seen by the other view, in (0, 1].
        outlier_fraction (float): Share of each view made of uniform outliers, in [0, 1).
        noise_sigma (float): Coordinate noise as a fraction of the diameter, >= 0.
        rotation_magnitude (float): Angle of the ground-truth rotation in degrees.
        n_parts (int): Number of labelled parts.
        feature_noise (float): Standard deviation of the semantic feature noise, >= 0.
        seed (int): Seed of every random draw.
    """
    n_points: int = 1024
    shape: str = 'composite'
    overlap_fraction: float = 1.0
    outlier_fraction: float = 0.0
    noise_sigma: float = 0.0
    rotation_magnitude: float = 30.0
    n_parts: int = 4
    feature_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}, expected one of {', '.join(SHAPES)}")
        if not 0 < self.overlap_fraction <= 1:
            raise ValueError(f"overlap_fraction must lie in (0, 1], got {self.overlap_fraction}")
        if not 0 <= self.outlier_fraction < 1:
            raise ValueError(f"outlier_fraction must lie in [0, 1), got {self.outlier_fraction}")
        if self.noise_sigma < 0 or self.feature_noise < 0:
            raise ValueError("noise levels must be >= 0")
        if self.n_points < 3 or self.n_parts < 1:
            raise ValueError("a scene needs at least 3 points and 1 part")

    def __json__(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class ScenePair:
    """
    Attributes:
        query (PointCloud): Query view, in its own frame.
        reference (PointCloud): Reference view.
        gt_pose (RigidPose): Pose mapping the query onto the reference.
        gt_overlap_q (np.ndarray): Query points also seen by the reference.
        gt_overlap_r (np.ndarray): Reference points also seen by the query.
        outlier_q (np.ndarray): Query outliers (never in the overlap).
        outlier_r (np.ndarray): Reference outliers.
        diameter (float): Largest pairwise distance of the reference cloud as emitted (noise and outliers included).
        spec (SceneSpec): Generating parameters.
    """
    query: PointCloud
    reference: PointCloud
    gt_pose: RigidPose
    gt_overlap_q: np.ndarray
    gt_overlap_r: np.ndarray
    outlier_q: np.ndarray
    outlier_r: np.ndarray
    diameter: float
    spec: SceneSpec = field(default_factory=SceneSpec)

    def measured_overlap(self) -> Tuple[float, float]:
        """Overlap share of the surface points of each view, counted from the masks."""
        return (float(self.gt_overlap_q.sum() / (~self.outlier_q).sum()),
                float(self.gt_overlap_r.sum() / (~self.outlier_r).sum()))


def _split(count: int, parts: int) -> np.ndarray:
    sizes = np.full(parts, count // parts)
    sizes[:count % parts] += 1
    return sizes


def _unit_vectors(rng: np.random.Generator, count: int) -> np.ndarray:
    vectors = rng.standard_normal((count, 3))
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return vectors / np.where(norms > 0, norms, 1.0)


def _sphere(rng: np.random.Generator, count: int, center: np.ndarray, radius: float) -> np.ndarray:
    return center + radius * _unit_vectors(rng, count)


def _ellipsoid(rng: np.random.Generator, count: int, center: np.ndarray, axes: np.ndarray) -> np.ndarray:
    return center + _unit_vectors(rng, count) * axes


def _box(rng: np.random.Generator, count: int, center: np.ndarray, half: np.ndarray) -> np.ndarray:
    # Face drawn with probability proportional to its area
    areas = np.array([half[1] * half[2], half[0] * half[2], half[0] * half[1]])
    axis = rng.choice(3, size=count, p=areas / areas.sum())
    side = rng.choice([-1.0, 1.0], size=count)
    local = rng.uniform(-1.0, 1.0, size=(count, 3)) * half
    local[np.arange(count), axis] = side * half[axis]
    return center + local


def _blob(rng: np.random.Generator, count: int, n_parts: int) -> Tuple[np.ndarray, np.ndarray]:
    directions = _unit_vectors(rng, count)
    lobes = _unit_vectors(rng, 3)
    amplitudes = rng.uniform(0.15, 0.4, size=3)
    radius = 1.0 + np.sum(amplitudes * np.clip(directions @ lobes.T, 0.0, None) ** 2, axis=1)
    points = directions * radius[:, None]
    azimuth = np.arctan2(directions[:, 1], directions[:, 0]) + np.pi
    labels = np.minimum((azimuth / (2.0 * np.pi) * n_parts).astype(int), n_parts - 1)
    return points, labels


def sample_surface(shape: str, n_parts: int, count: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Samples ``count`` surface points of a random shape.

    Returns:
        Tuple[np.ndarray, np.ndarray]: ``count x 3`` points and their part labels in ``[0, n_parts)``.
    """
    if shape == 'parametric-blob':
        return _blob(rng, count, n_parts)

    blocks, labels = [], []
    for part, size in enumerate(_split(count, n_parts)):
        center = rng.uniform(-0.6, 0.6, size=3)
        kind = {'sphere-union': 0, 'box-union': 1}.get(shape, part % 3)
        if kind == 0:
            block = _sphere(rng, size, center, rng.uniform(0.35, 0.7))
        elif kind == 1:
            block = _box(rng, size, center, rng.uniform(0.2, 0.6, size=3))
        else:
            block = _ellipsoid(rng, size, center, rng.uniform(0.2, 0.7, size=3))
        blocks.append(block)
        labels.append(np.full(size, part))
    return np.vstack(blocks), np.concatenate(labels)


def random_pose(rng: np.random.Generator, magnitude_deg: float, diameter: float) -> RigidPose:
    """Rotation of exactly ``magnitude_deg`` about a random axis and a translation of up to half the diameter."""
    axis = _unit_vectors(rng, 1)[0]
    matrix = Rotation.from_rotvec(axis * np.deg2rad(magnitude_deg)).as_matrix()
    translation = _unit_vectors(rng, 1)[0] * rng.uniform(0.0, MAX_TRANSLATION) * diameter
    # scipy rotates column vectors; the row convention uses the transpose
    return RigidPose.from_matrix(matrix.T, translation)


def _semantic_features(labels: np.ndarray, n_parts: int, noise: float, rng: np.random.Generator) -> np.ndarray:
    features = np.eye(n_parts)[labels]
    if noise > 0:
        features = features + noise * rng.standard_normal(features.shape)
    features = unit_rows(features)
    dead = ~(np.linalg.norm(features, axis=1) > 0)
    features[dead] = np.eye(n_parts)[labels[dead]]
    return features


def _noise(rng: np.random.Generator, count: int, scale: float) -> np.ndarray:
    if scale <= 0:
        return np.zeros((count, 3))
    noise = scale * rng.standard_normal((count, 3))
    norms = np.linalg.norm(noise, axis=1, keepdims=True)
    limit = NOISE_CLIP * scale
    return noise * np.minimum(1.0, limit / np.where(norms > 0, norms, 1.0))


def _outliers(rng: np.random.Generator, count: int, surface: np.ndarray) -> np.ndarray:
    low, high = surface.min(axis=0), surface.max(axis=0)
    margin = OUTLIER_BOX_MARGIN * (high - low)
    return rng.uniform(low - margin, high + margin, size=(count, 3))


def _spans_space(points: np.ndarray) -> bool:
    singular = np.linalg.svd(points - points.mean(axis=0), compute_uv=False)
    return bool(singular[0] > 0 and singular[2] > 1e-6 * singular[0])


def generate_scene(spec: SceneSpec) -> ScenePair:
    """
    Generates the scene pair described by ``spec``. The same spec always yields the same pair.

    :raises InfeasibleOverlap: The requested overlap cannot be realized with the available points, or no valid
        pair was found in 100 attempts.
    """
    rng = make_rng(spec.seed)
    n_outliers = int(round(spec.outlier_fraction * spec.n_points))
    n_surface = spec.n_points - n_outliers
    shared = int(round(spec.overlap_fraction * n_surface))
    if n_surface < 3 or shared < 3:
        raise InfeasibleOverlap(f"overlap {spec.overlap_fraction} of {n_surface} surface points leaves "
                                f"{shared} shared points, at least 3 are needed")
    if abs(shared / n_surface - spec.overlap_fraction) > OVERLAP_TOLERANCE:
        raise InfeasibleOverlap(f"overlap {spec.overlap_fraction} cannot be reached within "
                                f"{OVERLAP_TOLERANCE} with {n_surface} surface points")

    for attempt in range(MAX_ATTEMPTS):
        pool_size = 2 * n_surface - shared
        surface, labels = sample_surface(spec.shape, spec.n_parts, pool_size, rng)

        # Sorting along a random direction cuts both views with one plane
        order = np.argsort(surface @ _unit_vectors(rng, 1)[0], kind='stable')
        query_rows = order[:n_surface]
        reference_rows = order[pool_size - n_surface:]
        if not (_spans_space(surface[query_rows]) and _spans_space(surface[reference_rows])):
            logger.debug(f"scene seed={spec.seed} attempt {attempt}: flat view, resampling")
            continue
        return _assemble(spec, rng, surface, labels, query_rows, reference_rows, n_surface - shared, n_outliers)

    raise InfeasibleOverlap(f"no valid scene for seed {spec.seed} after {MAX_ATTEMPTS} attempts")


def _assemble(spec: SceneSpec, rng: np.random.Generator, surface: np.ndarray, labels: np.ndarray,
              query_rows: np.ndarray, reference_rows: np.ndarray, first_shared: int, n_outliers: int) -> ScenePair:
    n_surface = query_rows.size
    shared_rows = set(query_rows[first_shared:].tolist())
    # noise and translation scale with the noise-free surface
    surface_diameter = float(np.max(pdist(surface[reference_rows])))
    gt_pose = random_pose(rng, spec.rotation_magnitude, surface_diameter)
    noise_scale = spec.noise_sigma * surface_diameter

    views = []
    for rows in (query_rows, reference_rows):
        points = surface[rows] + _noise(rng, n_surface, noise_scale)
        view_labels = labels[rows]
        overlap = np.array([row in shared_rows for row in rows.tolist()], dtype=bool)
        if n_outliers:
            points = np.vstack([points, _outliers(rng, n_outliers, surface[rows])])
            view_labels = np.concatenate([view_labels, rng.integers(0, spec.n_parts, size=n_outliers)])
            overlap = np.concatenate([overlap, np.zeros(n_outliers, dtype=bool)])
        outlier = np.arange(points.shape[0]) >= n_surface
        permutation = rng.permutation(points.shape[0])
        features = _semantic_features(view_labels[permutation], spec.n_parts, spec.feature_noise, rng)
        views.append((points[permutation], features, overlap[permutation], outlier[permutation]))

    (q_points, q_features, q_overlap, q_outlier), (r_points, r_features, r_overlap, r_outlier) = views
    query = apply_pose(invert_pose(gt_pose), PointCloud(q_points, sem_features=q_features))
    reference = PointCloud(r_points, sem_features=r_features)
    diameter = float(np.max(pdist(reference.points)))
    logger.debug(f"scene seed={spec.seed} shape={spec.shape} n={spec.n_points} diameter={diameter:.4g}")
    return ScenePair(query, reference, gt_pose, q_overlap, r_overlap, q_outlier, r_outlier, diameter, spec)
