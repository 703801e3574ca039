import numpy as np
import pytest

from tilelab.data.prng import make_rng
from tilelab.grid.video_grid import VideoGrid
from tilelab.search.toy_model import ToyModel, ToyModelConfig


@pytest.fixture
def toy_grid():
    return VideoGrid.build((8, 8, 8), (2, 2, 2))


@pytest.fixture
def small_grid():
    return VideoGrid.build((4, 4, 4), (2, 2, 2))


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def qkv():
    """Seeded (N, d) float32 Q, K, V factory"""
    def make(n, d=16, seed=0):
        gen = make_rng(seed, 99)
        return tuple(gen.standard_normal((n, d)).astype(np.float32) for _ in range(3))
    return make


@pytest.fixture(scope="session")
def planted_model():
    """Two local heads planted on STA (2,2,2), two global heads on (6,6,6)"""
    return ToyModel(ToyModelConfig(
        layers=2, heads=4, width=32, dims=(8, 8, 8), tile=(2, 2, 2), seed=7,
        sharpness=30.0, plants=[(2, 2, 2), (6, 6, 6), (2, 2, 2), (6, 6, 6)],
    ))
