import pytest

from softhand import kinematics as kin
from softhand.hand import build_hand


@pytest.fixture(scope="session")
def hand():
    return build_hand()


@pytest.fixture(scope="session")
def coeffs():
    return kin.load_coefficients()
