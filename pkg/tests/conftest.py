import numpy as np
import pytest

from padic_kinetics._functions import ConstantRate
from padic_kinetics.basin import Basin, LandscapeModel
from padic_kinetics.config import glass_default, protein_default
from padic_kinetics.padic import RadialProfile
from padic_kinetics.scenarios import run_glass_scenario, run_protein_scenario


def random_autonomous_model(p, n, N, rng, low=0.5, high=5.0):
    """Model with n explicit radial levels per basin and random inter-basin rates."""
    levels = [list(rng.uniform(low, high, size=n)) for _ in range(N)]
    inter = [[None if i == j else float(rng.uniform(low, high)) for j in range(N)] for i in range(N)]
    basins = [Basin(f"B{I}", RadialProfile(p, levels[I])) for I in range(N)]
    return LandscapeModel(p, basins, inter), levels, inter


def two_basin_constant(p=3, levels=(1.0, 0.5), out_rate=0.4, back_rate=0.2):
    """Autonomous two-basin model; ``out_rate`` drains basin 0, ``back_rate`` feeds it."""
    basins = [Basin("U", RadialProfile(p, list(levels))), Basin("F", RadialProfile(p, list(levels)))]
    inter = [[None, ConstantRate(back_rate)], [ConstantRate(out_rate), None]]
    return LandscapeModel(p, basins, inter)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def glass_bundle():
    return run_glass_scenario(glass_default())


@pytest.fixture(scope="session")
def protein_bundle():
    return run_protein_scenario(protein_default())
