import pytest

from viewshift.corpus import load_fixture


@pytest.fixture(scope="session")
def pfun():
    return load_fixture("pfun").project


@pytest.fixture(scope="session")
def pdata():
    return load_fixture("pdata").project


@pytest.fixture(scope="session")
def forward_script():
    return load_fixture("forward-script").scripts["forward"]


@pytest.fixture(scope="session")
def reverse_script():
    return load_fixture("reverse-script").scripts["reverse"]


ENTRIES = ("r1", "r2", "r3", "r4")
EXPECTED = {"r1": "1+2", "r2": "3", "r3": "1+2+3", "r4": "6"}
