import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def random_tensor(rng, c=None, h=None, w=None, scale=1.0):
    """A random non-negative feature tensor, shapes drawn if not given."""
    c = c or int(rng.integers(1, 9))
    h = h or int(rng.integers(1, 6))
    w = w or int(rng.integers(1, 6))
    return rng.random((c, h, w)).astype(np.float32) * scale


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
