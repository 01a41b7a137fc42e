"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from samdetect import Dataset


@pytest.fixture
def exact_line() -> Dataset:
    """Two features on the exact affine relation b = 2a + 1."""
    return Dataset(
        values=np.array([[0.0, 1.0], [1.0, 3.0], [2.0, 5.0]]),
        feature_names=("a", "b"),
        name="line",
    )


def exact_plane_dataset(n: int = 1000, seed: int = 0) -> Dataset:
    """Noiseless d=4 data where each feature is affine in the others.

    Columns are (z1, z2, z3, z1 + z2 + z3 + 1), so every feature can be
    written as an affine function of the remaining three.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 3))
    fourth = z.sum(axis=1, keepdims=True) + 1.0
    return Dataset(
        values=np.hstack([z, fourth]),
        feature_names=("x1", "x2", "x3", "x4"),
        name="plane",
    )
