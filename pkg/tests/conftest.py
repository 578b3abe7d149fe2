import pytest

from liouville_ext.mesh import build_mesh
from liouville_ext.surface import build_surface


@pytest.fixture(scope="session")
def s2():
    return build_surface(2)


@pytest.fixture(scope="session")
def s3():
    return build_surface(3)


@pytest.fixture(scope="session")
def mesh02(s2):
    return build_mesh(s2, 0.2)
