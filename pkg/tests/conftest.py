"""
Shared fixtures and the --runslow switch for Monte Carlo acceptance runs.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from coarray.emvs_model import SceneConfig, TargetParams  # noqa: E402
from coarray.geometry import build_coprime_array  # noqa: E402
from harness.scenarios import close_pair_targets, table2_targets, three_target_scene  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow Monte Carlo tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240518)


@pytest.fixture
def transmit_array():
    return build_coprime_array(3, 4, "transmit")


@pytest.fixture
def receive_array():
    return build_coprime_array(3, 5, "receive")


@pytest.fixture
def tiny_arrays():
    """Three-element ULAs {0, 1, 2} on both sides."""
    return build_coprime_array(1, 2, "transmit"), build_coprime_array(1, 2, "receive")


@pytest.fixture
def small_arrays():
    """(2, 3) and (2, 5) arrays: 6 and 8 elements, coarrays of 15 and 23."""
    return build_coprime_array(2, 3, "transmit"), build_coprime_array(2, 5, "receive")


def random_targets(rng, k, low_deg=8.0, high_deg=70.0):
    """K targets with every angle drawn uniformly in [low, high] degrees."""
    return [
        TargetParams.from_degrees(rng.uniform(low_deg, high_deg, size=8), power=float(rng.uniform(0.5, 2.0)))
        for _ in range(k)
    ]


@pytest.fixture
def three_target_config(transmit_array, receive_array):
    return SceneConfig(transmit_array, receive_array, three_target_scene(), snapshots=200, snr_db=10.0, rng_seed=7)


@pytest.fixture
def table2_config(transmit_array, receive_array):
    return SceneConfig(transmit_array, receive_array, table2_targets(), snapshots=200, snr_db=10.0, rng_seed=11)


@pytest.fixture
def close_pair_config(transmit_array, receive_array):
    return SceneConfig(transmit_array, receive_array, close_pair_targets(), snapshots=200, snr_db=10.0, rng_seed=3)


@pytest.fixture
def make_targets(rng):
    return lambda k, **kw: random_targets(rng, k, **kw)
