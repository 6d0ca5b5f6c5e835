import numpy as np
import pytest

from filamentflow import (
    circle_curve,
    ellipse_curve,
    random_smooth_curve,
    with_constant_speed,
)
from filamentflow.mollify import TubeContext


@pytest.fixture(scope="session")
def circle():
    return circle_curve()


@pytest.fixture(scope="session")
def ellipse():
    """Constant-speed refit of the 2:1 ellipse."""
    return with_constant_speed(ellipse_curve(2.0, 1.0), k=16)


@pytest.fixture(scope="session")
def ellipse_raw():
    return ellipse_curve(2.0, 1.0)


@pytest.fixture(scope="session")
def wavy_curve():
    return random_smooth_curve(7, order=4)


@pytest.fixture(scope="session")
def circle_ctx(circle):
    return TubeContext(circle)


@pytest.fixture(scope="session")
def ellipse_ctx(ellipse):
    return TubeContext(ellipse)


def rotation_matrix(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
