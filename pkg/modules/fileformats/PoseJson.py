"""
PoseJson Module

JSON files of a query-to-reference pose, and the per-point confidence sidecar written next to it.

Pose file::

    {"frame": "query_to_reference", "rotation": [9 floats, row-major], "translation": [3 floats],
     "metrics": {...optional...}}

The rotation acts on row vectors (``X R + t``). On load it must be orthonormal within 1e-6; slightly off rotations
are projected onto the nearest proper rotation.
"""

import json
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from modules.CustomExceptions import ParseError, SchemaMismatch
from modules.core.RigidPose import RigidPose, is_rotation

FRAME = "query_to_reference"
LOAD_TOLERANCE = 1e-6


class PoseModel(BaseModel):
    """Schema of a pose file. Unknown keys are ignored so ground-truth files read as poses too."""
    model_config = ConfigDict(extra='ignore', allow_inf_nan=False)

    rotation: Annotated[List[float], Field(min_length=9, max_length=9)]
    translation: Annotated[List[float], Field(min_length=3, max_length=3)]
    frame: Literal["query_to_reference"] = FRAME
    metrics: Optional[Dict[str, Optional[float]]] = None


class ConfidenceModel(BaseModel):
    """Per-point confidences over the full input clouds (points left out by subsampling hold 0)."""
    model_config = ConfigDict(extra='forbid', allow_inf_nan=False)

    confidence_query: List[Annotated[float, Field(ge=0.0, le=1.0)]]
    confidence_reference: List[Annotated[float, Field(ge=0.0, le=1.0)]]


def dumps(data: Dict) -> bytes:
    """Stable JSON encoding shared by every writer of the package."""
    return (json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + '\n').encode('utf-8')


def parse_model(model: type, data: Union[bytes, str], what: str):
    """
    Validates JSON ``data`` against a pydantic ``model``.

    :raises ParseError: ``data`` is not JSON.
    :raises SchemaMismatch: ``data`` is JSON but does not fit the schema.
    """
    try:
        raw = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ParseError(f"{what} is not valid JSON: {getattr(e, 'msg', e)}",
                         getattr(e, 'lineno', None), getattr(e, 'colno', None)) from e
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        raise SchemaMismatch(f"{what} does not match its schema: {e}") from e


def pose_from_model(model: PoseModel) -> RigidPose:
    rotation = np.asarray(model.rotation, dtype=np.float64).reshape(3, 3)
    if not is_rotation(rotation, LOAD_TOLERANCE):
        raise ParseError("rotation is not orthonormal with determinant +1 (tolerance 1e-6)")
    if is_rotation(rotation):
        return RigidPose(rotation, model.translation)
    return RigidPose.from_matrix(rotation, model.translation)


def write_pose(pose: RigidPose, metrics: Optional[Dict[str, float]] = None) -> bytes:
    data = {**pose.__json__(), "frame": FRAME}
    if metrics is not None:
        data["metrics"] = {key: float(value) for key, value in metrics.items()}
    return dumps(PoseModel.model_validate(data).model_dump(exclude_none=True))


def read_pose(data: Union[bytes, str]) -> Tuple[RigidPose, Optional[Dict[str, Optional[float]]]]:
    """
    Parses a pose file.

    :return: The pose and its metrics (None when absent).
    :raises ParseError: Invalid JSON or a non-orthonormal rotation.
    :raises SchemaMismatch: Missing or malformed fields.
    """
    model = parse_model(PoseModel, data, "pose file")
    return pose_from_model(model), model.metrics


def write_confidence(confidence_query: np.ndarray, confidence_reference: np.ndarray) -> bytes:
    model = ConfidenceModel(confidence_query=[float(value) for value in confidence_query],
                            confidence_reference=[float(value) for value in confidence_reference])
    return dumps(model.model_dump())


def read_confidence(data: Union[bytes, str]) -> Tuple[np.ndarray, np.ndarray]:
    model = parse_model(ConfidenceModel, data, "confidence file")
    return np.asarray(model.confidence_query), np.asarray(model.confidence_reference)


def confidence_path(pose_path: Union[str, Path]) -> Path:
    """Sidecar location of a pose file: ``pose.json`` -> ``pose.confidence.json``."""
    pose_path = Path(pose_path)
    return pose_path.with_name(pose_path.stem + '.confidence.json')
