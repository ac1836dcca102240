import pytest

from panotrack.geometry import CameraModel


@pytest.fixture
def cam() -> CameraModel:
    """The default camera: 1920x960, full spherical FoV, 1.2 m mount."""
    return CameraModel()
