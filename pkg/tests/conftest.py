import numpy as np
import pytest

import shardann as sa


@pytest.fixture(scope="session")
def small_data():
    """4k clustered points + 100 matched queries, d=16 (one generator call)."""
    full = sa.gen_synthetic(4100, 16, 32, 0.2, seed=99)
    base = sa.Dataset(full.data[:4000])
    queries = sa.Dataset(full.data[4000:])
    return base, queries


@pytest.fixture(scope="session")
def small_index(small_data):
    base, _ = small_data
    index, report = sa.build_index(base, 4, 16, seed=5, rho=0.05, ghost_degree=8)
    return index, report


@pytest.fixture(scope="session")
def small_truth(small_data):
    base, queries = small_data
    return sa.exact_knn_batch(base, queries, 10)
