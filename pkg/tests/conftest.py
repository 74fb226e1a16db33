import numpy as np
import pytest

from palate.catalog import KernelConfig, build_neighbor_index, estimate_kernel
from palate.synth import make_assets


@pytest.fixture(scope="session")
def small_assets():
    """60-item synthetic catalog with a reasonably connected neighbor graph."""
    catalog, embeddings = make_assets(60, dim=8, clusters=4, spread=0.3, seed=1)
    kernel = estimate_kernel(embeddings, KernelConfig(delta_percentile=20.0))
    index = build_neighbor_index(embeddings, kernel)
    return catalog, embeddings, kernel, index


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
