import pytest

from futureab.groups import setup_group


@pytest.fixture(scope="session")
def test_params():
    return setup_group("test")


@pytest.fixture(scope="session")
def prod_params():
    return setup_group("production")
