import os

import numpy as np
import pytest

os.environ.setdefault("KAP_CACHE_DIR", "")  # set per-session below before kap import

from kap.collision import precompute_kernel_modes
from kap.grid import VelocityGrid


@pytest.fixture(scope="session", autouse=True)
def _cache_dir(tmp_path_factory):
    os.environ["KAP_CACHE_DIR"] = str(tmp_path_factory.mktemp("kernel_cache"))


@pytest.fixture(scope="session")
def vg8():
    return VelocityGrid(8, 7.0)


@pytest.fixture(scope="session")
def vg16():
    return VelocityGrid(16, 7.0)


@pytest.fixture(scope="session")
def vg32():
    return VelocityGrid(32, 7.0)


@pytest.fixture(scope="session")
def km8(vg8):
    return precompute_kernel_modes(vg8)


@pytest.fixture(scope="session")
def km16(vg16):
    return precompute_kernel_modes(vg16)


@pytest.fixture(scope="session")
def km32(vg32):
    return precompute_kernel_modes(vg32)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
