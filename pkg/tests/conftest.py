"""Shared synthetic-geometry fixtures."""

import numpy as np
import pytest

from shrelight.synthetic import sphere_normal_map


@pytest.fixture(scope="session")
def sphere64():
    return sphere_normal_map(64)


@pytest.fixture(scope="session")
def sphere32():
    return sphere_normal_map(32)


def random_unit_dirs(rng: np.random.Generator, n: int, upper: bool = False) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    if upper:
        v[:, 2] = np.abs(v[:, 2])
    return v
