import numpy as np
import pytest

from anisolap.geometry import DiskDomain, PolygonDomain, triangulate


@pytest.fixture(scope="session")
def disk():
    return DiskDomain(1.0)


@pytest.fixture(scope="session")
def disk_mesh_16(disk):
    return triangulate(disk, 1 / 16)


@pytest.fixture(scope="session")
def disk_mesh_32(disk):
    return triangulate(disk, 1 / 32)


@pytest.fixture(scope="session")
def square2():
    """[-1, 1]^2, axis-aligned (structured meshes)."""
    return PolygonDomain([[-1, -1], [1, -1], [1, 1], [-1, 1]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
