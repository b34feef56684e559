from .Sampling import fps, default_fps_start, subsample, make_rng
from .Descriptors import compute_geometric_features, local_eigen_profile
from .Correspondence import MODES, correspondences, ent
from .Registration import RegistrationConfig, RegistrationResult, IterationRecord, Registration, register
