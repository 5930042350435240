import numpy as np
import pytest

from phonon_inverse.grids import build_desk_grid, build_grid, build_paper_grid
from phonon_inverse.materials import material_from_config


@pytest.fixture(scope="session")
def paper_grid():
    return build_paper_grid(0.5)


@pytest.fixture(scope="session")
def desk_grid():
    return build_desk_grid(1.0)


@pytest.fixture(scope="session")
def desk_material(desk_grid):
    return material_from_config({"kind": "power_law"}, desk_grid.omega_nodes)


@pytest.fixture(scope="session")
def paper_material(paper_grid):
    return material_from_config({"kind": "power_law"}, paper_grid.omega_nodes)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
