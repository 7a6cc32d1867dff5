"""Exact brute-force k-nearest-neighbor ground truth and recall@k.

The oracle deliberately avoids the matmul expansion trick: distances come
from the same direct float32 primitive the search kernel uses, chunked over
the dataset, so approximate results can be compared entrywise against the
oracle without cross-method float noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, load_fvecs, load_ivecs, save_fvecs, save_ivecs, squared_l2

_CHUNK = 8192


@dataclass(frozen=True)
class NeighborList:
    """Top-k neighbors of one query, ascending by (distance, id)."""

    query_id: int
    ids: np.ndarray    # (k,) int32 global point ids
    dists: np.ndarray  # (k,) float32 true (non-squared) distances

    def __post_init__(self):
        if len(self.ids) != len(self.dists):
            raise ValueError("ids and dists must have equal length")
        if len(np.unique(self.ids)) != len(self.ids):
            raise ValueError("neighbor ids must be unique")
        if np.any(np.diff(self.dists) < 0):
            raise ValueError("distances must be non-decreasing")


def _top_by_distance_id(sq: np.ndarray, ids: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The k smallest (sq distance, id) pairs, in order, ties fully resolved."""
    if k < sq.shape[0]:
        thresh = np.partition(sq, k - 1)[k - 1]
        cand = np.nonzero(sq <= thresh)[0]  # >= k entries; includes all boundary ties
    else:
        cand = np.arange(sq.shape[0])
    order = cand[np.lexsort((ids[cand], sq[cand]))][:k]
    return ids[order], sq[order]


def exact_knn(dataset: Dataset, query: np.ndarray, k: int) -> NeighborList:
    """Exact k nearest neighbors of one query by full scan; ties break by id."""
    return exact_knn_batch(dataset, np.asarray(query, dtype=np.float32)[None, :], k)[0]


def exact_knn_batch(dataset: Dataset, queries, k: int) -> list[NeighborList]:
    """Exact kNN for a batch of queries (Dataset or (q, d) array)."""
    qdata = queries.data if isinstance(queries, Dataset) else np.asarray(queries, np.float32)
    if qdata.ndim != 2 or qdata.shape[1] != dataset.d:
        raise ValueError(f"query dimension {qdata.shape} does not match dataset d={dataset.d}")
    if not 1 <= k <= dataset.n:
        raise ValueError(f"k must be in [1, {dataset.n}], got {k}")
    out = []
    sq = np.empty(dataset.n, dtype=np.float32)
    for qi in range(qdata.shape[0]):
        q = qdata[qi]
        for lo in range(0, dataset.n, _CHUNK):
            hi = min(lo + _CHUNK, dataset.n)
            sq[lo:hi] = squared_l2(dataset.data[lo:hi], q)
        ids, best = _top_by_distance_id(sq, dataset.ids, k)
        out.append(NeighborList(qi, ids.copy(), np.sqrt(best)))
    return out


def recall_at_k(truth: NeighborList, result: NeighborList, k: int) -> float:
    """|truth[:k] ∩ result[:k]| / k, intersecting by point id."""
    if len(truth.ids) < k or len(result.ids) < k:
        raise ValueError(f"both lists need at least k={k} entries")
    hits = np.intersect1d(truth.ids[:k], result.ids[:k]).size
    return hits / k


def mean_recall(truths: list[NeighborList], results: list[NeighborList], k: int) -> float:
    """Mean recall@k over matched query lists."""
    if len(truths) != len(results):
        raise ValueError("truth/result list length mismatch")
    return float(np.mean([recall_at_k(t, r, k) for t, r in zip(truths, results)]))


# --- ground-truth persistence (ivecs ids + fvecs distances) ---

def save_ground_truth(lists: list[NeighborList], ids_path, dists_path) -> None:
    ids = np.stack([nl.ids for nl in lists])
    dists = np.stack([nl.dists for nl in lists])
    save_ivecs(ids, ids_path)
    save_fvecs(dists, dists_path)


def load_ground_truth(ids_path, dists_path=None) -> list[NeighborList]:
    ids = load_ivecs(ids_path)
    if dists_path is not None:
        dists = load_fvecs(dists_path).data
    else:
        dists = np.zeros_like(ids, dtype=np.float32)
    return [NeighborList(qi, ids[qi], dists[qi]) for qi in range(ids.shape[0])]
