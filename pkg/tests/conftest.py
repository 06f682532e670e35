import os

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import time

import numpy as np
import pytest

from eincm.config import RunConfig
from eincm.events import EventSet, SensorGeometry
from eincm.pipeline import estimate_sequence
from eincm.synth import SceneSpec, generate_scene


def random_events(rng, n, width=32, height=32, t_span=0.1):
    t = np.sort(rng.uniform(0.0, t_span, n))
    x = rng.integers(0, width, n).astype(np.float64)
    y = rng.integers(0, height, n).astype(np.float64)
    p = rng.choice(np.array([-1, 1], dtype=np.int8), n)
    return EventSet(x, y, t, p), SensorGeometry(width, height)


@pytest.fixture(scope="session")
def scene():
    """64x64 texture translating by (3, -2) px over a 0.1 s window."""
    return generate_scene(SceneSpec())


@pytest.fixture(scope="session")
def small_scene():
    return generate_scene(SceneSpec(width=32, height=32, n_shapes=12, velocity=(20.0, 10.0)))


def _run(sample, cfg):
    start = time.process_time()
    wall = time.perf_counter()
    est = next(estimate_sequence([sample], cfg))
    return est, time.perf_counter() - wall, time.process_time() - start


@pytest.fixture(scope="session")
def bimodal_run(scene):
    return _run(scene, RunConfig())


@pytest.fixture(scope="session")
def events_only_run(scene):
    return _run(scene, RunConfig(events_only=True))
