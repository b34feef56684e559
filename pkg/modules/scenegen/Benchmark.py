"""
Benchmark Module

Runs the registration over a batch of scenes, once per requested correspondence mode, and aggregates the per-scene
metrics into a Report. A failing scene is recorded with its error message and never stops the batch. Scenes run on
a thread pool; results keep the input order whatever the number of threads.

Usage Example:
    report = benchmark([SceneSpec(seed=s) for s in range(10)], RegistrationConfig(), modes=['argmax', 'confidence_ot'])
    report.to_frame().to_csv('bench.csv', index=False)
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from modules.CustomExceptions import RegistrationError
from modules.pipeline.Registration import RegistrationConfig, register
from modules.scenegen.Metrics import (confidence_auc, is_recalled, overlap_iou, rotation_error,
                                      translation_error)
from modules.scenegen.SceneGenerator import ScenePair, SceneSpec, generate_scene

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SceneResult:
    """Metrics of one scene under one mode. Metric fields are None when the scene failed."""
    scene: str
    mode: str
    diameter: Optional[float] = None
    rotation_error: Optional[float] = None
    translation_error: Optional[float] = None
    overlap_iou: Optional[float] = None
    confidence_auc: Optional[float] = None
    ent: Optional[float] = None
    delta_marginal: Optional[float] = None
    recalled: bool = False
    error: Optional[str] = None
    wall_clock: Optional[float] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def __json__(self) -> Dict:
        data = {key: _json_number(value) for key, value in asdict(self).items()}
        if self.wall_clock is None:
            del data['wall_clock']
        return data


@dataclass(frozen=True)
class ModeSummary:
    n_scenes: int
    n_failures: int
    recall: float
    median_rotation_error: Optional[float]
    mean_rotation_error: Optional[float]
    median_translation_error: Optional[float]
    mean_translation_error: Optional[float]
    mean_overlap_iou: Optional[float]
    mean_confidence_auc: Optional[float]
    mean_ent: Optional[float]
    mean_delta_marginal: Optional[float]
    mean_wall_clock: Optional[float] = None

    def __json__(self) -> Dict:
        data = {key: _json_number(value) for key, value in asdict(self).items()}
        if self.mean_wall_clock is None:
            del data['mean_wall_clock']
        return data


@dataclass(frozen=True)
class Report:
    """
    Attributes:
        config (Dict): Registration configuration of the run.
        modes (List[str]): Correspondence modes, in run order.
        results (List[SceneResult]): One row per scene and mode, grouped by mode, scenes in input order.
        summaries (Dict[str, ModeSummary]): Aggregates per mode.
        record_timings (bool): Whether wall-clock fields were recorded.
    """
    config: Dict
    modes: List[str]
    results: List[SceneResult] = field(default_factory=list)
    summaries: Dict[str, ModeSummary] = field(default_factory=dict)
    record_timings: bool = False
    schema_version: int = REPORT_SCHEMA_VERSION

    @property
    def n_scenes(self) -> int:
        return len({result.scene for result in self.results})

    def to_frame(self) -> pd.DataFrame:
        """Per-scene rows as a DataFrame."""
        columns = [name for name in SceneResult.__dataclass_fields__ if self.record_timings or name != 'wall_clock']
        return pd.DataFrame([asdict(result) for result in self.results], columns=columns)

    def __json__(self) -> Dict:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "modes": list(self.modes),
            "n_scenes": self.n_scenes,
            "record_timings": self.record_timings,
            "results": [result.__json__() for result in self.results],
            "summaries": {mode: summary.__json__() for mode, summary in self.summaries.items()},
        }


def _json_number(value):
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _stat(series: pd.Series, how: str) -> Optional[float]:
    values = series.dropna()
    if values.empty:
        return None
    return float(values.median() if how == 'median' else values.mean())


def summarize(results: Sequence[SceneResult], record_timings: bool = False) -> Dict[str, ModeSummary]:
    """Aggregates scene results per mode; failed scenes count as not recalled and are left out of the averages."""
    if not results:
        return {}
    frame = pd.DataFrame([asdict(result) for result in results])
    summaries = {}
    for mode, group in frame.groupby('mode', sort=False):
        summaries[mode] = ModeSummary(
            n_scenes=int(len(group)),
            n_failures=int(group['error'].notna().sum()),
            recall=float(group['recalled'].astype(bool).mean()),
            median_rotation_error=_stat(group['rotation_error'], 'median'),
            mean_rotation_error=_stat(group['rotation_error'], 'mean'),
            median_translation_error=_stat(group['translation_error'], 'median'),
            mean_translation_error=_stat(group['translation_error'], 'mean'),
            mean_overlap_iou=_stat(group['overlap_iou'], 'mean'),
            mean_confidence_auc=_stat(group['confidence_auc'], 'mean'),
            mean_ent=_stat(group['ent'], 'mean'),
            mean_delta_marginal=_stat(group['delta_marginal'], 'mean'),
            mean_wall_clock=_stat(group['wall_clock'], 'mean') if record_timings else None,
        )
    return summaries


def evaluate_pair(name: str, pair: ScenePair, cfg: RegistrationConfig) -> SceneResult:
    """Registers one pair and measures the result against its ground truth."""
    result = register(pair.query, pair.reference, cfg)
    rot_err = rotation_error(pair.gt_pose, result.pose)
    trans_err = translation_error(pair.gt_pose, result.pose)

    gt_q = pair.gt_overlap_q[result.query_indices]
    gt_r = pair.gt_overlap_r[result.reference_indices]
    iou = (overlap_iou(result.confidence_q, gt_q) + overlap_iou(result.confidence_r, gt_r)) / 2.0
    auc = confidence_auc(np.concatenate([result.confidence_q, result.confidence_r]), np.concatenate([gt_q, gt_r]))

    return SceneResult(
        scene=name,
        mode=cfg.correspondence_mode,
        diameter=pair.diameter,
        rotation_error=rot_err,
        translation_error=trans_err,
        overlap_iou=iou,
        confidence_auc=auc,
        ent=result.metrics['ent'],
        delta_marginal=result.metrics['delta_marginal'],
        recalled=is_recalled(rot_err, trans_err, pair.diameter),
    )


def _run_one(name: str, load: Callable[[], ScenePair], cfg: RegistrationConfig,
             record_timings: bool) -> SceneResult:
    start = time.perf_counter()
    try:
        row = evaluate_pair(name, load(), cfg)
    except (RegistrationError, ValueError) as error:
        logger.warning(f"scene={name} mode={cfg.correspondence_mode} failed: {type(error).__name__}: {error}")
        row = SceneResult(scene=name, mode=cfg.correspondence_mode, error=f"{type(error).__name__}: {error}")
    if record_timings:
        row = SceneResult(**{**asdict(row), 'wall_clock': time.perf_counter() - start})
    logger.info(f"scene={name} mode={row.mode} rotation_error={row.rotation_error} "
                f"translation_error={row.translation_error} recalled={row.recalled}")
    return row


def _run(tasks: Sequence[Tuple[str, Callable[[], ScenePair]]], cfg: RegistrationConfig,
         modes: Optional[Sequence[str]], threads: int, record_timings: bool) -> Report:
    modes = list(modes) if modes else [cfg.correspondence_mode]
    work = [(name, load, cfg.with_values(correspondence_mode=mode)) for mode in modes for name, load in tasks]

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(lambda item: _run_one(*item, record_timings), work))

    return Report(cfg.__json__(), modes, results, summarize(results, record_timings), record_timings)


def benchmark(specs: Sequence[SceneSpec], cfg: RegistrationConfig, modes: Optional[Sequence[str]] = None,
              threads: int = 1, record_timings: bool = False) -> Report:
    """
    Generates one scene per spec and benchmarks every mode on it.

    :param specs: Non-empty list of scene specs; scene names are ``seed<seed>``.
    :param cfg: Base configuration; its mode is replaced by each of ``modes``.
    :param modes: Modes to compare; defaults to the mode of ``cfg``.
    :param threads: Worker threads.
    :param record_timings: Add wall-clock seconds per scene.
    """
    if not specs:
        raise ValueError("benchmark needs at least one scene spec")
    tasks = [(f"seed{spec.seed}", lambda spec=spec: generate_scene(spec)) for spec in specs]
    return _run(tasks, cfg, modes, threads, record_timings)


def benchmark_pairs(pairs: Sequence[Tuple[str, ScenePair]], cfg: RegistrationConfig,
                    modes: Optional[Sequence[str]] = None, threads: int = 1,
                    record_timings: bool = False) -> Report:
    """Benchmarks already generated (or loaded) named scene pairs. An empty list gives an empty report."""
    tasks = [(name, lambda pair=pair: pair) for name, pair in pairs]
    return _run(tasks, cfg, modes, threads, record_timings)
