import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from seamstitch.synthetic import identity_scene, single_plane_scene, two_plane_scene


@pytest.fixture(scope="session")
def single_plane():
    return single_plane_scene(seed=21)


@pytest.fixture(scope="session")
def two_plane():
    return two_plane_scene(seed=11)


@pytest.fixture(scope="session")
def two_plane_imaged():
    """Smaller imaged scene so pipeline tests stay fast."""
    return two_plane_scene(
        seed=13, dims=(480, 360), points_per_plane=50, lines_per_plane=3, with_images=True
    )


@pytest.fixture(scope="session")
def identity():
    return identity_scene(seed=5)
