from .Umeyama import CorrespondenceBundle, weighted_umeyama, estimate_pose, pose_objective, joint_bundle
