from importlib import resources

import pytest

from eonvideo.config import resolve_estimator
from eonvideo.spectrum import SpectrumGrid
from eonvideo.topology import load_topology


@pytest.fixture(scope="session")
def sixnode():
    return load_topology("sixnode")


@pytest.fixture
def sixnode_grid(sixnode):
    text = resources.files("eonvideo.data").joinpath("sixnode_grid.txt").read_text()
    return SpectrumGrid.from_text(text, sixnode.link_ids)


@pytest.fixture(scope="session")
def nsfnet():
    return load_topology("nsfnet")


@pytest.fixture(scope="session")
def estimator():
    return resolve_estimator("default")
