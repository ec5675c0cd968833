import pytest
from hypothesis import HealthCheck, settings

from rankone.heights import build_family

settings.register_profile(
    "repo", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def spec_11():
    return build_family([1, 1])


@pytest.fixture(scope="session")
def spec_111():
    return build_family([1, 1, 1])


@pytest.fixture(scope="session")
def spec_const6():
    return build_family([1] * 6)


@pytest.fixture(scope="session")
def spec_2_5_17():
    return build_family([2, 5, 17])
