"""Shared fixtures: the Heisenberg group, random valid specs, small configs."""

import numpy as np
import pytest

from carnotou.errors import CarnotouError
from carnotou.group import GroupSpec, ValidatedSpec, heisenberg, validate_spec
from carnotou.simulate import SimConfig


@pytest.fixture(scope="session")
def heis() -> ValidatedSpec:
    return heisenberg()


def make_random_spec(rng: np.random.Generator, n=None, m=None) -> ValidatedSpec:
    """Draw a random skew family until it validates; dimensions modest."""
    while True:
        n_ = int(n if n is not None else rng.integers(2, 5))
        m_ = int(m if m is not None else rng.integers(1, 4))
        if m_ > n_ * (n_ - 1) // 2:
            continue
        A = rng.normal(size=(m_, n_, n_))
        B = (A - np.swapaxes(A, 1, 2)) / 2.0
        try:
            return validate_spec(GroupSpec(f"random-{n_}-{m_}", n_, m_, B))
        except CarnotouError:
            continue


@pytest.fixture()
def random_specs():
    def _make(count: int, seed: int = 0, n=None, m=None):
        rng = np.random.default_rng(seed)
        return [make_random_spec(rng, n=n, m=m) for _ in range(count)]

    return _make


@pytest.fixture()
def small_cfg():
    def _make(seed: int = 7, paths: int = 4000, steps: int = 64, s: float = 1.0):
        return SimConfig(seed=seed, paths=paths, steps_per_unit_time=steps, s=s)

    return _make
