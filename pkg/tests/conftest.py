import numpy as np
import pytest
from hypothesis import settings

from springreg.core import ProblemInstance, State
from springreg.harness import random_rotation

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_instance(rng, n=10, sigma=0.01, noise=None, hetero=False):
    """Instance in the usual recipe; ``noise`` defaults to ``sigma``."""
    x = rng.normal(size=(n, 3))
    R = random_rotation(rng)
    t = rng.normal(size=3)
    sig = rng.uniform(0.5, 2.0, n) * sigma if hetero else np.full(n, sigma)
    eps = rng.normal(size=(n, 3)) * (sig[:, None] if noise is None else noise)
    return ProblemInstance(x, x @ R.T + t + eps, sig), R, t


def random_state(rng, scale=1.0):
    return State(rng.normal(size=3) * scale, random_rotation(rng), rng.normal(size=3) * scale,
                 rng.normal(size=3) * scale)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
