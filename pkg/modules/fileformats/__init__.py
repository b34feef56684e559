from .Cogp import read_cogp, write_cogp, write_cogp_binary, load_cogp, save_cogp
from .PoseJson import (PoseModel, ConfidenceModel, read_pose, write_pose, read_confidence, write_confidence,
                       confidence_path)
from .ReportJson import ReportModel, read_report, write_report, report_schema
from .SceneFiles import SceneSpecModel, GroundTruthModel, read_scene, write_scene, list_scenes, read_ground_truth
