import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'src'))

from instance import generate_dataset, plant_params  # noqa: E402


@pytest.fixture
def five_points():
    """2-D set where one halfspace always misses a point but two halfspaces classify everything"""
    X = np.array([[-2.0, 0.0], [2.0, 0.0], [0.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    Z = np.array([-1, -1, 1, 1, 1])
    return X, Z


@pytest.fixture
def separable_points():
    rng = np.random.default_rng(3)
    X = np.vstack([rng.uniform(-3.0, -1.0, size=(10, 2)), rng.uniform(1.0, 3.0, size=(10, 2))])
    Z = np.r_[np.ones(10, dtype=int), -np.ones(10, dtype=int)]
    return X, Z


@pytest.fixture
def proper_instance():
    params = plant_params('proper', 3, positive_target=0.4, seed=11)
    return generate_dataset(params, 90, calibration_size=20_000)
