from pathlib import Path

import numpy as np
import pytest

REPO = Path(__file__).resolve().parent.parent
DATASETS = REPO / "datasets"


@pytest.fixture(scope="session")
def datasets_dir() -> Path:
    return DATASETS


def dyadic(rng, shape, scale=8, denom=64):
    """Random dyadic rationals: sums are exact in float64 regardless of
    association, which keeps dual-route comparisons bit-for-bit."""
    return rng.integers(-scale * denom, scale * denom, size=shape) / denom
