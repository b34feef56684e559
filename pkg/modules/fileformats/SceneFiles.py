"""
SceneFiles Module

On-disk layout of a scene pair, one directory per scene::

    <scene>/query.cogp
    <scene>/reference.cogp
    <scene>/gt.json        pose file extended with masks, diameter and the generating spec
"""

from pathlib import Path
from typing import List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from modules.CustomExceptions import SchemaMismatch
from modules.fileformats.Cogp import load_cogp, save_cogp
from modules.fileformats.PoseJson import PoseModel, dumps, parse_model, pose_from_model
from modules.scenegen.SceneGenerator import ScenePair, SceneSpec

QUERY_FILE = 'query.cogp'
REFERENCE_FILE = 'reference.cogp'
GT_FILE = 'gt.json'


class SceneSpecModel(BaseModel):
    """Schema of a scene spec, as accepted by ``synth --spec``."""
    model_config = ConfigDict(extra='forbid', allow_inf_nan=False)

    n_points: int = Field(default=1024, ge=3)
    shape: Literal['sphere-union', 'box-union', 'parametric-blob', 'composite'] = 'composite'
    overlap_fraction: float = Field(default=1.0, gt=0.0, le=1.0)
    outlier_fraction: float = Field(default=0.0, ge=0.0, lt=1.0)
    noise_sigma: float = Field(default=0.0, ge=0.0)
    rotation_magnitude: float = 30.0
    n_parts: int = Field(default=4, ge=1)
    feature_noise: float = Field(default=0.0, ge=0.0)
    seed: int = 0

    def to_spec(self) -> SceneSpec:
        return SceneSpec(**self.model_dump())


class GroundTruthModel(PoseModel):
    model_config = ConfigDict(extra='forbid', allow_inf_nan=False)

    gt_overlap_q: List[bool]
    gt_overlap_r: List[bool]
    outlier_q: List[bool]
    outlier_r: List[bool]
    diameter: float
    spec: SceneSpecModel


def write_ground_truth(pair: ScenePair) -> bytes:
    model = GroundTruthModel(
        **pair.gt_pose.__json__(),
        gt_overlap_q=pair.gt_overlap_q.tolist(),
        gt_overlap_r=pair.gt_overlap_r.tolist(),
        outlier_q=pair.outlier_q.tolist(),
        outlier_r=pair.outlier_r.tolist(),
        diameter=pair.diameter,
        spec=SceneSpecModel(**pair.spec.__json__()),
    )
    return dumps(model.model_dump(exclude_none=True))


def read_ground_truth(data: Union[bytes, str]) -> GroundTruthModel:
    return parse_model(GroundTruthModel, data, "ground-truth file")


def write_scene(directory: Union[str, Path], pair: ScenePair, binary: bool = False) -> Path:
    """Writes ``pair`` into ``directory`` (created if needed) and returns the directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_cogp(directory / QUERY_FILE, pair.query, binary=binary)
    save_cogp(directory / REFERENCE_FILE, pair.reference, binary=binary)
    (directory / GT_FILE).write_bytes(write_ground_truth(pair))
    return directory


def read_scene(directory: Union[str, Path]) -> ScenePair:
    """
    Loads the scene stored in ``directory``.

    :raises SchemaMismatch: Mask lengths disagree with the clouds.
    """
    directory = Path(directory)
    query = load_cogp(directory / QUERY_FILE)
    reference = load_cogp(directory / REFERENCE_FILE)
    gt = read_ground_truth((directory / GT_FILE).read_bytes())
    if len(gt.gt_overlap_q) != query.n or len(gt.outlier_q) != query.n:
        raise SchemaMismatch(f"{directory / GT_FILE}: query masks do not match {query.n} points")
    if len(gt.gt_overlap_r) != reference.n or len(gt.outlier_r) != reference.n:
        raise SchemaMismatch(f"{directory / GT_FILE}: reference masks do not match {reference.n} points")
    return ScenePair(
        query, reference, pose_from_model(gt),
        np.asarray(gt.gt_overlap_q, dtype=bool), np.asarray(gt.gt_overlap_r, dtype=bool),
        np.asarray(gt.outlier_q, dtype=bool), np.asarray(gt.outlier_r, dtype=bool),
        gt.diameter, gt.spec.to_spec(),
    )


def list_scenes(root: Union[str, Path]) -> List[Tuple[str, Path]]:
    """Named scene directories under ``root`` in name order; ``root`` itself when it is a scene directory."""
    root = Path(root)
    if (root / GT_FILE).is_file():
        return [(root.name, root)]
    if not root.is_dir():
        raise FileNotFoundError(f"scene directory not found: {root}")
    return [(path.name, path) for path in sorted(root.iterdir()) if (path / GT_FILE).is_file()]
