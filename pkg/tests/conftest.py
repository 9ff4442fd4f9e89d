import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rs():
    return np.random.default_rng(20240611)


def normal_line(rs, n, noise=1.0):
    x = rs.standard_normal(n)
    return np.column_stack([x, 1.0 + 2.0 * x + noise * rs.standard_normal(n)])
