import time

import numpy as np
import pytest

from hyprel.flow import RadialCurveState, run
from hyprel.minimal import ShootingControls, shoot_catenoid


@pytest.fixture(scope="session")
def catenoid_pair():
    """Both minimal annuli spanning the circles of radius 1 and 2 (coarse scan)."""
    res = shoot_catenoid(1.0, 2.0, ShootingControls(n_grid=128))
    assert len(res.surfaces) == 2
    return res


@pytest.fixture(scope="session")
def reference_run():
    t0 = time.perf_counter()
    traj = run(RadialCurveState.perturbed(), 2.0, n_snapshots=40)
    traj.metadata["wall_time_s"] = time.perf_counter() - t0
    return traj


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
