import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def gaussian_image(size=32, sigma=4.0, center=None):
    c = (size - 1) / 2.0
    cx, cy = (c, c) if center is None else center
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    return np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma**2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
