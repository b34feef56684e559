import numpy as np
import pytest

from modules.core.HyperParams import HyperParams
from modules.core.PointCloud import PointCloud
from modules.pipeline.Registration import RegistrationConfig
from modules.scenegen.SceneGenerator import SceneSpec


def rotation_z(degrees: float) -> np.ndarray:
    """Rotation about z in the row-vector convention: ``[1, 0, 0] @ rotation_z(90) == [0, 1, 0]``."""
    angle = np.deg2rad(degrees)
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


@pytest.fixture
def rot_z():
    return rotation_z


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def blob_points(rng):
    """Anisotropic 3D point set with no symmetry."""
    return rng.standard_normal((60, 3)) * np.array([1.0, 0.6, 0.3])


@pytest.fixture
def fast_cfg():
    return RegistrationConfig(hp=HyperParams(), n_fine=128, n_coarse=64, descriptor_k=16)


@pytest.fixture
def trivial_spec():
    return SceneSpec(n_points=128, overlap_fraction=1.0, rotation_magnitude=0.0, seed=5)


@pytest.fixture
def rotated_spec():
    return SceneSpec(n_points=128, overlap_fraction=1.0, rotation_magnitude=40.0, seed=5)

@pytest.fixture
def collinear_cloud():
    x = np.linspace(0.0, 1.0, 40)
    return PointCloud(np.stack([x, np.zeros_like(x), np.zeros_like(x)], axis=1))
