import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: end-to-end acceptance criteria (slower)"
    )
