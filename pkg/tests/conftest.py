import numpy as np
import pytest

import dogc.updates


@pytest.fixture
def strict_updates():
    """Enable the per-call sub-objective assertions for the duration."""
    old = dogc.updates.STRICT_CHECKS
    dogc.updates.STRICT_CHECKS = True
    yield
    dogc.updates.STRICT_CHECKS = old


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
