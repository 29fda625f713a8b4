import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hida.cloudio import (
    ClassTable,
    LabeledCloud,
    SceneObject,
    SceneSpec,
    random_scene_spec,
    synth_scene,
)


@pytest.fixture(scope="session")
def small_scene():
    """A compact labeled scene with ground truth, reused across modules."""
    spec = random_scene_spec(7, n_instances=4, background_density=80.0)
    return synth_scene(spec, seed=7)


@pytest.fixture
def two_chair_spec():
    table = ClassTable.default()
    return SceneSpec(
        room=(6.0, 6.0, 2.5),
        objects=[
            SceneObject("chair", (1.0, 1.0, 0.0), (1.5, 1.5, 0.9), 2000.0),
            SceneObject("chair", (3.5, 1.0, 0.0), (4.0, 1.5, 0.9), 2000.0),
        ],
        background_density=0.0,
        class_table=table,
    )


def make_cloud(points, **kw) -> LabeledCloud:
    return LabeledCloud(points=np.asarray(points, dtype=np.float32), **kw)
