import numpy as np
import pytest


def random_spd(rng, p, cond=1e4):
    """Random SPD matrix with condition number ``cond``."""
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    eig = np.geomspace(1.0, 1.0 / cond, p)
    a = (q * eig) @ q.T
    return (a + a.T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
