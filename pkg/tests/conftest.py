import pytest

from imasim.calibration import default_calibration


@pytest.fixture(scope="session")
def cal():
    return default_calibration()
