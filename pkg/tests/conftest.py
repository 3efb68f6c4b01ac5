import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def unit_circle_ls():
    from gradproj.geometry import SphereSurface

    return SphereSurface(2).as_level_set()


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)
