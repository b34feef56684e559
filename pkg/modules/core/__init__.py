from .PointCloud import PointCloud, unit_rows
from .RigidPose import RigidPose, apply_pose, invert_pose, compose_pose, nearest_rotation
from .ConfidenceState import ConfidenceState
from .TransportPlan import TransportPlan
from .HyperParams import HyperParams
