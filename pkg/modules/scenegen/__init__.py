from .SceneGenerator import SHAPES, SceneSpec, ScenePair, generate_scene, random_pose, sample_surface
from .Metrics import rotation_error, translation_error, overlap_iou, confidence_auc, is_recalled
from .Benchmark import SceneResult, ModeSummary, Report, benchmark, benchmark_pairs, summarize, evaluate_pair
