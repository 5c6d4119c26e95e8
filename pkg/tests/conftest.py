import numpy as np
import pytest

from ringsense.geometry import RigidTransform, default_camera, rotation_from_euler_xyz
from ringsense.layout import default_layout
from ringsense.simulator import default_compliance, default_reference_pose


@pytest.fixture(scope="session")
def camera():
    return default_camera()


@pytest.fixture(scope="session")
def layout():
    return default_layout()


@pytest.fixture(scope="session")
def reference_pose():
    return default_reference_pose()


@pytest.fixture(scope="session")
def compliance():
    return default_compliance()


def random_pose(rng, center=(0.0, 0.0, 10.0), t_range=1.0, angle_range=0.15):
    """Uniform pose in the sensor operating envelope around ``center``."""
    t = np.asarray(center) + rng.uniform(-t_range, t_range, 3)
    angles = rng.uniform(-angle_range, angle_range, 3)
    return RigidTransform(rotation_from_euler_xyz(*angles), t)
