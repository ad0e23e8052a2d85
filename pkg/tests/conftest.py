import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))  # for the oracles package

settings.register_profile("blindcs", max_examples=40, deadline=None)
settings.load_profile("blindcs")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
