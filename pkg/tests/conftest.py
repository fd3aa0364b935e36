import numpy as np
import pytest

from igflow.diffcalc import Point
from igflow.dually_flat import ETA, THETA
from igflow.models import gaussian_model, quadratic_model


@pytest.fixture(scope="session")
def gaussian():
    return gaussian_model()


@pytest.fixture(scope="session")
def quadratic():
    return quadratic_model()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def eta_point(m, mu, sigma):
    return m.from_params([mu, sigma], ETA)


def theta_point(m, mu, sigma):
    return m.from_params([mu, sigma], THETA)


def point(coords, chart=THETA):
    return Point(np.asarray(coords, dtype=float), chart)
