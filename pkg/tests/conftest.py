import os
import sys

import numpy as np
import pytest

# Ensure project root is on sys.path so 'app' can be imported in tests
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from app.core.grid import GridShape, HeatmapStack, ScalarField, VectorField2  # noqa: E402
from app.core.pose import AUX_ORDER, FrameBundle, Pose  # noqa: E402
from app.core.skeleton import default_skeleton, simple_skeleton  # noqa: E402
from app.simulator.fields import NoiseConfig, simulate  # noqa: E402
from app.simulator.scene import SceneConfig  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running scenario and training checks')


@pytest.fixture
def skeleton():
    return default_skeleton()


@pytest.fixture
def tiny_skeleton():
    """head_top, neck, pelvis"""
    return simple_skeleton(('head_top', 'neck', 'pelvis'))


def make_pose(points, person_id=None, confidence=1.0):
    """Pose from a list of (x, y) or None per joint"""
    xy = np.array([p if p is not None else (0.0, 0.0) for p in points], dtype=np.float64)
    visible = np.array([p is not None for p in points])
    conf = np.full(len(points), confidence)
    return Pose.from_arrays(xy, visible=visible, confidence=conf, person_id=person_id)


def make_bundle(shape, joint_count=3, t=0, ke=None, svf=None, heatmaps=None, ground_truth=None,
                tvf=None, he_vectors=()):
    """Bundle with zero fields unless given"""
    h, w = shape.array_shape
    heat = heatmaps if heatmaps is not None else HeatmapStack.zeros(shape, joint_count)
    ke_field = ke if ke is not None else ScalarField.zeros(shape)
    svf_field = svf if svf is not None else VectorField2.zeros(shape)
    aux = tuple(ScalarField(shape, np.zeros((h, w))) for _ in AUX_ORDER)
    forward, backward = tvf if tvf is not None else (None, None)
    return FrameBundle(t, heat, ke_field, aux, svf_field, forward, backward, he_vectors, ground_truth)


@pytest.fixture
def noiseless_scene():
    """Two persons, six frames, exact fields"""
    scene = SceneConfig(person_count=2, frame_count=6, seed=3)
    return simulate(scene, NoiseConfig.zero(he_dim=16))


@pytest.fixture
def grid_8x8():
    return GridShape(8, 8)
