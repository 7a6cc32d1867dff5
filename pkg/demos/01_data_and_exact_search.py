"""Datasets, fvecs/ivecs files, and the exact-kNN oracle.

Generates a small clustered dataset, round-trips it through the binary
vector formats, and runs the brute-force oracle that every approximate
result in this library is judged against.

Run:  python demos/01_data_and_exact_search.py
"""

import tempfile
from pathlib import Path

import numpy as np

import shardann as sa

# A clustered dataset: 64 Gaussian blobs in [0,1]^16.  Queries are drawn
# from the same mixture by generating extra rows and splitting them off.
full = sa.gen_synthetic(n=5100, d=16, n_clusters=64, spread=0.1, seed=42)
base = sa.Dataset(full.data[:5000])
queries = sa.Dataset(full.data[5000:])
print(f"dataset: n={base.n} d={base.d}, queries: {queries.n}")

# fvecs round trip is bit-exact: each record is [int32 d][d x float32].
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "base.fvecs"
    sa.save_fvecs(base, path)
    reloaded = sa.load_fvecs(path)
    print(f"fvecs round trip: {path.stat().st_size} bytes, "
          f"bit-identical={np.array_equal(reloaded.data, base.data)}")

# The oracle scans the whole dataset with the same float32 distance
# primitive the graph search uses, so comparisons are noise-free.
truth = sa.exact_knn_batch(base, queries, k=10)
nl = truth[0]
top3 = ", ".join(f"{i}@{d:.4f}" for i, d in zip(nl.ids[:3], nl.dists[:3]))
print(f"query 0 true top-3 (id@distance): {top3}")

# Recall@k compares id sets; the oracle against itself is always 1.0.
print(f"recall of truth vs truth: {sa.recall_at_k(nl, nl, 10):.1f}")

# Distances are true Euclidean norms, reproducible exactly:
q0 = queries.data[0]
direct = sa.l2_distance(q0, base.data[nl.ids[0]])
print(f"recomputed top-1 distance: {direct:.6f} (stored {nl.dists[0]:.6f})")
