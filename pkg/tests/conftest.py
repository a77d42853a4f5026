import pathlib

import numpy as np
import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: long-running redundant checks (live oracle recomputation)"
    )


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def reference_model_path():
    path = FIXTURES / "reference_random.pmdl"
    if not path.exists():
        pytest.skip("reference model fixture not generated")
    return path


@pytest.fixture(scope="session")
def reference_model(reference_model_path):
    from percival import modelio

    return modelio.load_model(reference_model_path.read_bytes())


@pytest.fixture(scope="session")
def reference_golden_path():
    path = FIXTURES / "reference_random.pgold"
    if not path.exists():
        pytest.skip("golden fixture not generated")
    return path


def rand_chw(rng, c, h, w, lo=-1.0, hi=1.0):
    return (rng.random((c, h, w), dtype=np.float32) * (hi - lo) + lo).astype(np.float32)
