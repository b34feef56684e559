"""
ReportJson Module

Benchmark report files. The report is encoded with sorted keys and two-space indentation, floats in their
round-trip representation and non-finite values as null, so identical runs give identical bytes. The published
JSON schema is generated from the pydantic models below (:func:`report_schema`).
"""

import json
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict

from modules.fileformats.PoseJson import parse_model
from modules.scenegen.Benchmark import REPORT_SCHEMA_VERSION, Report


class SceneResultModel(BaseModel):
    model_config = ConfigDict(extra='forbid')

    scene: str
    mode: str
    diameter: Optional[float] = None
    rotation_error: Optional[float] = None
    translation_error: Optional[float] = None
    overlap_iou: Optional[float] = None
    confidence_auc: Optional[float] = None
    ent: Optional[float] = None
    delta_marginal: Optional[float] = None
    recalled: bool
    error: Optional[str] = None
    wall_clock: Optional[float] = None


class ModeSummaryModel(BaseModel):
    model_config = ConfigDict(extra='forbid')

    n_scenes: int
    n_failures: int
    recall: float
    median_rotation_error: Optional[float] = None
    mean_rotation_error: Optional[float] = None
    median_translation_error: Optional[float] = None
    mean_translation_error: Optional[float] = None
    mean_overlap_iou: Optional[float] = None
    mean_confidence_auc: Optional[float] = None
    mean_ent: Optional[float] = None
    mean_delta_marginal: Optional[float] = None
    mean_wall_clock: Optional[float] = None


class ReportModel(BaseModel):
    """Schema of a benchmark report file."""
    model_config = ConfigDict(extra='forbid')

    schema_version: Literal[1]
    config: Dict[str, Any]
    modes: List[str]
    n_scenes: int
    record_timings: bool
    results: List[SceneResultModel]
    summaries: Dict[str, ModeSummaryModel]


def write_report(report: Report) -> bytes:
    """Encodes ``report``; the output always validates against :class:`ReportModel`."""
    text = json.dumps(report, default=lambda o: o.__json__(), sort_keys=True, indent=2, allow_nan=False) + '\n'
    ReportModel.model_validate_json(text)
    return text.encode('utf-8')


def read_report(data: Union[bytes, str]) -> ReportModel:
    """
    :raises ParseError: Not JSON.
    :raises SchemaMismatch: JSON that is not a report of the supported schema version.
    """
    return parse_model(ReportModel, data, "report")


def report_schema() -> Dict[str, Any]:
    schema = ReportModel.model_json_schema()
    schema["$comment"] = f"benchmark report, schema version {REPORT_SCHEMA_VERSION}"
    return schema
