import numpy as np
import pytest

from nlcheeger.geometry import GridDomain, GridSpec
from nlcheeger.kernel import KernelParams, build_table, covering_params


@pytest.fixture(scope="session")
def interval8():
    grid = GridSpec(1, (8,), 0.125, (0.0,))
    return GridDomain(grid, np.ones(8, dtype=bool))


@pytest.fixture(scope="session")
def unit_cell():
    grid = GridSpec(1, (1,), 1.0, (0.0,))
    return GridDomain(grid, np.ones(1, dtype=bool))


@pytest.fixture(scope="session")
def table_unit_cell_s05():
    grid = GridSpec(1, (1,), 1.0, (0.0,))
    return build_table(KernelParams(1, 0.5, 1.0, truncation_radius=60.0), grid)


@pytest.fixture(scope="session")
def table_interval8_s05():
    grid = GridSpec(1, (8,), 0.125, (0.0,))
    return build_table(KernelParams(1, 0.5, 1.0, truncation_radius=40.0), grid)


@pytest.fixture(scope="session")
def square8():
    grid = GridSpec(2, (8, 8), 0.125, (0.0, 0.0))
    return GridDomain(grid, np.ones((8, 8), dtype=bool))


@pytest.fixture(scope="session")
def table_square8_s05():
    grid = GridSpec(2, (8, 8), 0.125, (0.0, 0.0))
    return build_table(covering_params(grid, 0.5, 1.0), grid)
