import numpy as np
import pytest

from kitaevedge import CouplingParams, build_finite, build_strip


KAPPA = 0.027
GAP = 6 * np.sqrt(3) * KAPPA


@pytest.fixture(scope="session")
def zigzag_cell():
    """One-cell periodic zigzag strip, 80 site-rows."""
    return build_strip("zigzag", rows=80, length=1)


@pytest.fixture(scope="session")
def armchair_cell():
    """Two-cell periodic armchair strip, 60 columns."""
    return build_strip("armchair", rows=60, length=2)


@pytest.fixture(scope="session")
def hexagon8():
    return build_finite("hexagon", side=8)


@pytest.fixture(scope="session")
def params_gapped():
    return CouplingParams(kappa=KAPPA)


def top_zfree_sites(graph):
    """Free-b_z sites of the sample's top zigzag side, ordered along x."""
    zfree = [s for s, fl in graph.free_b_modes if fl == "z"]
    ys = graph.positions[zfree][:, 1]
    top = [s for s in zfree if graph.positions[s, 1] > ys.max() - 0.3]
    return sorted(top, key=lambda s: graph.positions[s, 0])


def bottom_zfree_sites(graph):
    zfree = [s for s, fl in graph.free_b_modes if fl == "z"]
    ys = graph.positions[zfree][:, 1]
    bot = [s for s in zfree if graph.positions[s, 1] < ys.min() + 0.3]
    return sorted(bot, key=lambda s: graph.positions[s, 0])
