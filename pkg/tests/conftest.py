import numpy as np
import pytest

import rabin_synth as rs
from rabin_synth.envs import GRID_DEMO_FORMULA


@pytest.fixture(scope="session")
def grid_model():
    return rs.build_grid_world()


@pytest.fixture(scope="session")
def grid_dra(grid_model):
    formula = rs.parse_ltl(GRID_DEMO_FORMULA)
    return rs.translate_fragment(rs.to_fragment(formula), tuple(grid_model.atoms))


@pytest.fixture(scope="session")
def grid_product(grid_model, grid_dra):
    return rs.build_product(grid_model, grid_dra)


@pytest.fixture(scope="session")
def grid_scheme():
    return rs.RewardScheme(pair_index=1, wg=500.0, wb=-500.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
