import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)


def random_spd_configuration(rng, n, spread=1.0):
    """Random det > 0 matrix with moderate conditioning."""
    raw = rng.standard_normal((n, n)) * spread
    u, s, vt = np.linalg.svd(raw)
    s = np.exp(rng.uniform(-1.0, 1.0, n))
    phi = u @ np.diag(s) @ vt
    if np.linalg.det(phi) < 0:
        u[:, -1] *= -1.0
        phi = u @ np.diag(s) @ vt
    return phi
