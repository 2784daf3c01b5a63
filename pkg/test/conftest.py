"""
Test fixtures shared across all test modules.

Command: pytest test/ -v
"""

from typing import Callable

import numpy as np
import pytest

from metakit.config import FINITE_DIFFERENCE_STEP
from metakit.data.synthetic import generate_synthetic_corpus


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> tuple:
    """100 glyph classes x 20 examples at 28px, split 64/16/20 (generated once)."""
    return generate_synthetic_corpus(
        tmp_path_factory.mktemp("glyphs"),
        num_classes=100,
        examples_per_class=20,
        image_size=28,
        seed=7,
    )


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory) -> tuple:
    """10 classes x 6 examples at 8px; cheap enough to copy and corrupt."""
    return generate_synthetic_corpus(
        tmp_path_factory.mktemp("small"),
        num_classes=10,
        examples_per_class=6,
        image_size=8,
        seed=3,
        split_fractions=(0.6, 0.2, 0.2),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def numeric_grad() -> Callable[[Callable[[np.ndarray], float], np.ndarray], np.ndarray]:
    """Central finite differences of a scalar function of one array."""

    def central(fn: Callable[[np.ndarray], float], point: np.ndarray) -> np.ndarray:
        point = np.array(point, dtype=np.float64)
        result = np.zeros_like(point)
        step = FINITE_DIFFERENCE_STEP
        for index in np.ndindex(point.shape):
            plus = point.copy()
            minus = point.copy()
            plus[index] += step
            minus[index] -= step
            result[index] = (fn(plus) - fn(minus)) / (2 * step)
        return result

    return central

