from pathlib import Path

import pytest

from percival_trainer.synth import make_synthetic_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Eight-image corpus for fast loop tests: (root, train, test)."""
    root = tmp_path_factory.mktemp("tiny_corpus")
    train, test = make_synthetic_corpus(root, n=8, seed=5)
    return root, train, test
