"""Shared fixtures: the four reference configurations and signing directories."""

from pathlib import Path

import pytest

from fastbft.crypto import KeyDirectory
from fastbft.quorums import new_config

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = REPO_ROOT / "scenarios"


@pytest.fixture(scope="session")
def cfg4():
    return new_config(4, 1, 1)


@pytest.fixture(scope="session")
def cfg9():
    return new_config(9, 2, 2)


@pytest.fixture(scope="session")
def cfg7():
    return new_config(7, 2, 1, "generalized")


@pytest.fixture(scope="session")
def cfg12():
    return new_config(12, 3, 2, "generalized")


@pytest.fixture(scope="session")
def dir4(cfg4):
    return KeyDirectory(cfg4, seed=5)


@pytest.fixture(scope="session")
def dir9(cfg9):
    return KeyDirectory(cfg9, seed=5)


@pytest.fixture(scope="session")
def dir7(cfg7):
    return KeyDirectory(cfg7, seed=5)


@pytest.fixture(scope="session")
def dir12(cfg12):
    return KeyDirectory(cfg12, seed=5)
