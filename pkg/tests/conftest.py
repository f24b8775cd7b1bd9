import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: training-scale test (minutes); part of the default run"
    )


def random_sphere_points(rng, n, radius=1.0):
    pts = rng.standard_normal((n, 3))
    return radius * pts / np.linalg.norm(pts, axis=1)[:, None]


def random_torus_points(rng, n, big_r=1.0, small_r=0.25):
    theta = rng.uniform(0, 2 * np.pi, n)
    v = rng.uniform(0, 2 * np.pi, n)
    arm = big_r + small_r * np.cos(v)
    return np.column_stack(
        [arm * np.cos(theta), arm * np.sin(theta), small_r * np.sin(v)]
    )
