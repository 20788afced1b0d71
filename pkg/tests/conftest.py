import numpy as np
import pytest

from nomaload.network_model import CellConfig, Scenario, UeConfig
from nomaload.scenario_gen import GenConfig, generate


def make_scenario(gains, serving, demands, powers, *, rb_count=1, rb_bandwidth=1.0, noise=1.0, load_limit=1.0):
    """Hand-built scenario; gains are indexed [cell, ue]."""
    gains = np.asarray(gains, dtype=float)
    cells = tuple(CellConfig(i, (100.0 * i, 0.0), float(p)) for i, p in enumerate(powers))
    ues = tuple(
        UeConfig(j, (0.0, float(j)), int(s), float(d)) for j, (s, d) in enumerate(zip(serving, demands))
    )
    return Scenario(cells, ues, gains, rb_count, rb_bandwidth, noise, load_limit)


@pytest.fixture
def two_cell():
    # cell 0 serves UEs 0 and 1, cell 1 serves UE 2
    gains = [[1e-6, 1e-8, 1e-9], [1e-9, 1e-10, 1e-7]]
    return make_scenario(gains, [0, 0, 1], [2e6, 1e6, 1.5e6], [0.8, 0.1],
                         rb_count=100, rb_bandwidth=180e3, noise=1e-15)


@pytest.fixture(scope="session")
def small_random():
    """A handful of generated 3-cell/12-UE scenarios."""
    return [generate(GenConfig(seed=s, num_small_cells=2, num_ues=12)) for s in range(6)]
