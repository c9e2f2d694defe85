import numpy as np
import pytest

from app import create_app
from app.geometry.core import PointCloud
from config import TestingConfig


@pytest.fixture()
def app(tmp_path):
    class Config(TestingConfig):
        OUTPUT_DIR = str(tmp_path / "runs")

    return create_app(Config)


@pytest.fixture()
def runner(app):
    return app.test_cli_runner()


@pytest.fixture()
def client(app):
    return app.test_client()


@pytest.fixture()
def rng():
    return np.random.default_rng(7)


@pytest.fixture()
def lattice_line():
    """1000 points x = i / 100 on the first axis of R^2."""
    points = np.zeros((1000, 2))
    points[:, 0] = np.arange(1000) * 0.01
    return PointCloud(points)


@pytest.fixture()
def lattice_disk():
    """Integer lattice points of the disk of radius 30 in R^2."""
    g = np.arange(-30, 31)
    xx, yy = np.meshgrid(g, g)
    points = np.column_stack([xx.ravel(), yy.ravel()]).astype(float)
    return PointCloud(points[np.hypot(points[:, 0], points[:, 1]) <= 30])


@pytest.fixture()
def lattice_cross():
    """Two lattice lines through the origin at 60 degrees, spacing 0.01; the origin is row 100."""
    t = np.arange(-100, 101) * 0.01
    first = np.column_stack([t, np.zeros_like(t)])
    u = np.array([0.5, np.sqrt(3) / 2])
    second = t[t != 0][:, None] * u
    return PointCloud(np.vstack([first, second]))
