"""Shard partitioning and all precomputed search structures.

Builds are exact and data-independent: a blocked matmul screen
(|x|^2 + |y|^2 - 2xy) ranks candidates with a small safety pad, then every
surviving candidate is rescored with the shared float32 distance primitive
and ranked by (distance, id), so results match the brute-force oracle
bit-for-bit.  The screen only prunes points that cannot be among the
requested neighbors (the pad absorbs its rounding noise).

Structures per shard:

* proximity graph: exact kNN rows + reverse-edge augmentation, fixed width j
* inter-shard table: exact nearest neighbor of every node in the next shard
  of the ring
* ghost index: sampled sub-graph for entry-point staging
* direction table: packed sign bits of every edge, for selection at search
  time
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, squared_l2
from .direction import pack_sign_bits, words_per_vector
from .rng import TAG_GHOST_SAMPLE, TAG_PARTITION, stream

_RESCORE_PAD = 8  # extra screen candidates absorbing matmul-vs-direct rank noise
_ROW_CHUNK = 2048
_SCREEN_BUDGET = 1 << 27  # floats per screen block (distance matrix chunk)


@dataclass(frozen=True)
class ShardSet:
    """Balanced random partition of a dataset into N disjoint shards."""

    n_shards: int
    shard_of: np.ndarray   # (n,) int32 shard index per global row
    local_of: np.ndarray   # (n,) int32 local index within the shard
    rows: list             # per shard: int64 array of global row numbers

    def shard_dataset(self, dataset: Dataset, s: int) -> Dataset:
        return dataset.subset(self.rows[s])


def partition(dataset: Dataset, n_shards: int, seed: int) -> ShardSet:
    """Deterministic balanced random partition; sizes differ by at most 1."""
    n = dataset.n
    if not 1 <= n_shards <= n:
        raise ValueError(f"need 1 <= N <= n, got N={n_shards}, n={n}")
    perm = stream(seed, TAG_PARTITION).permutation(n)
    rows = [np.sort(perm[s::n_shards]) for s in range(n_shards)]
    shard_of = np.empty(n, dtype=np.int32)
    local_of = np.empty(n, dtype=np.int32)
    for s, r in enumerate(rows):
        shard_of[r] = s
        local_of[r] = np.arange(len(r), dtype=np.int32)
    return ShardSet(n_shards, shard_of, local_of, rows)


def _knn_candidates(queries: np.ndarray, targets: np.ndarray, k: int) -> np.ndarray:
    """Candidate lists (n_queries, k) by blocked matmul screen over targets."""
    nq, n = queries.shape[0], targets.shape[0]
    chunk = max(64, min(_ROW_CHUNK, _SCREEN_BUDGET // n))
    t_sq = np.einsum("ij,ij->i", targets, targets)
    out = np.empty((nq, k), dtype=np.int64)
    for lo in range(0, nq, chunk):
        hi = min(lo + chunk, nq)
        block = queries[lo:hi]
        d2 = t_sq - 2.0 * (block @ targets.T)  # query norms drop out of the ranking
        if k < n:
            out[lo:hi] = np.argpartition(d2, k - 1, axis=1)[:, :k]
        else:
            out[lo:hi] = np.broadcast_to(np.arange(n), (hi - lo, n))
    return out


def _rescore_rows(vectors: np.ndarray, cand: np.ndarray, take: int,
                  exclude_self: bool) -> np.ndarray:
    """Rescore candidates in float32, rank by (distance, id), keep ``take``."""
    n = vectors.shape[0]
    out = np.empty((n, take), dtype=np.int32)
    for lo in range(0, n, _ROW_CHUNK):
        hi = min(lo + _ROW_CHUNK, n)
        rows = cand[lo:hi]
        sq = squared_l2(vectors[rows], vectors[lo:hi, None, :])
        if exclude_self:
            sq[rows == np.arange(lo, hi)[:, None]] = np.inf
        order = np.lexsort((rows, sq), axis=-1)[:, :take]
        out[lo:hi] = np.take_along_axis(rows, order, axis=1)
    return out


def build_knn_graph(vectors: np.ndarray, j: int) -> np.ndarray:
    """Exact j-NN graph with reverse-edge augmentation, rows ranked by (dist, id).

    After the kNN pass, each node's row is merged with the sources of its
    incoming edges and the best j of the union are kept, which subsumes the
    insert-reverse-edge-if-closer rule deterministically.
    """
    n = vectors.shape[0]
    if not 0 <= j < n:
        raise ValueError(f"need 0 <= j < n_local, got j={j}, n_local={n}")
    if j == 0:
        return np.empty((n, 0), dtype=np.int32)
    cand_k = min(n, j + 1 + _RESCORE_PAD)
    cand = _knn_candidates(vectors, vectors, cand_k)
    adj = _rescore_rows(vectors, cand, j, exclude_self=True)

    # Reverse augmentation: keep the j best of (row ∪ incoming sources).
    src = np.repeat(np.arange(n, dtype=np.int64), j)
    order = np.argsort(adj.ravel(), kind="stable")
    dst_sorted = adj.ravel()[order]
    bounds = np.searchsorted(dst_sorted, np.arange(n + 1))
    out = adj.copy()
    for v in range(n):
        lo, hi = bounds[v], bounds[v + 1]
        if lo == hi:
            continue
        incoming = src[order[lo:hi]]
        union = np.unique(np.concatenate([adj[v], incoming]))
        union = union[union != v]
        if len(union) == j:  # incoming sources already in the row
            continue
        sq = squared_l2(vectors[union], vectors[v])
        keep = np.lexsort((union, sq))[:j]
        row = union[keep]
        if len(row) < j:  # degree deficit: repeat the last valid neighbor
            row = np.concatenate([row, np.full(j - len(row), row[-1], dtype=row.dtype)])
        out[v] = row
    return out.astype(np.int32)


def build_inter_shard_table(src_vectors: np.ndarray, dst_vectors: np.ndarray) -> np.ndarray:
    """Exact nearest neighbor in the target shard for every source node."""
    if dst_vectors.shape[0] == 0:
        raise ValueError("empty target shard")
    if src_vectors.shape[1] != dst_vectors.shape[1]:
        raise ValueError("shards must share dimension")
    cand_k = min(dst_vectors.shape[0], 1 + _RESCORE_PAD)
    cand = _knn_candidates(src_vectors, dst_vectors, cand_k)
    n = src_vectors.shape[0]
    out = np.empty(n, dtype=np.int32)
    for lo in range(0, n, _ROW_CHUNK):
        hi = min(lo + _ROW_CHUNK, n)
        rows = cand[lo:hi]
        sq = squared_l2(dst_vectors[rows], src_vectors[lo:hi, None, :])
        order = np.lexsort((rows, sq), axis=-1)[:, 0]
        out[lo:hi] = np.take_along_axis(rows, order[:, None], axis=1)[:, 0]
    return out


def ghost_count(n_local: int, rho: float) -> int:
    """ceil(rho * n_local) with an epsilon guarding float products like 0.01*10000."""
    return int(math.ceil(rho * n_local - 1e-9))


def build_ghost_index(vectors: np.ndarray, rho: float, j_g: int, seed: int,
                      shard: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Sampled ghost ids (sorted, distinct) and their exact kNN graph."""
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"sampling ratio must be in (0, 1], got {rho}")
    n = vectors.shape[0]
    g = ghost_count(n, rho)
    if g <= j_g:
        raise ValueError(f"ghost sample of {g} too small for out-degree {j_g}")
    rng = stream(seed, TAG_GHOST_SAMPLE, shard)
    ghost_ids = np.sort(rng.choice(n, size=g, replace=False)).astype(np.int32)
    ghost_adj = build_knn_graph(np.ascontiguousarray(vectors[ghost_ids]), j_g)
    return ghost_ids, ghost_adj


def build_direction_table(vectors: np.ndarray, adj: np.ndarray) -> np.ndarray:
    """Packed sign bits of (neighbor - node) for every edge; padding zeroed."""
    n, j = adj.shape
    w = words_per_vector(vectors.shape[1])
    out = np.empty((n, j, w), dtype=np.uint32)
    for lo in range(0, n, _ROW_CHUNK):
        hi = min(lo + _ROW_CHUNK, n)
        nbr = vectors[adj[lo:hi]]                # (c, j, d)
        out[lo:hi] = pack_sign_bits(nbr >= vectors[lo:hi, None, :])
    return out


@dataclass(frozen=True)
class ShardPack:
    """Serializable per-shard bundle (vectors live in the dataset, not here)."""

    global_ids: np.ndarray            # (n_local,) int32
    adj: np.ndarray                   # (n_local, j) int32
    inter_map: np.ndarray | None      # (n_local,) int32, None for N == 1
    ghost_ids: np.ndarray | None      # (g,) int32
    ghost_adj: np.ndarray | None      # (g, j_g) int32
    direction: np.ndarray | None      # (n_local, j, W) uint32

    @property
    def n_local(self) -> int:
        return self.global_ids.shape[0]


@dataclass(frozen=True)
class Index:
    """All precomputed structures for one dataset: N shard packs plus dims."""

    d: int
    n_total: int
    shards: list

    @property
    def n_shards(self) -> int:
        return len(self.shards)


@dataclass
class BuildReport:
    """Per-phase build times (seconds); auxiliary phases reported individually."""

    base_graph: float = 0.0
    inter_shard: float = 0.0
    ghost: float = 0.0
    direction: float = 0.0
    per_shard: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.base_graph + self.inter_shard + self.ghost + self.direction

    def aux_fraction(self) -> float:
        aux = self.inter_shard + self.ghost + self.direction
        return aux / self.total if self.total else 0.0


def build_index(
    dataset: Dataset,
    n_shards: int,
    j: int,
    seed: int,
    *,
    rho: float = 0.01,
    ghost_degree: int | None = None,
    with_ghost: bool = True,
    with_direction: bool = True,
) -> tuple[Index, BuildReport]:
    """Partition the dataset and build every per-shard structure.

    ghost_degree defaults to min(j, 16).  Ghost indexes are skipped when the
    sample would be too small for that degree.
    """
    shard_set = partition(dataset, n_shards, seed)
    j_g = min(j, 16) if ghost_degree is None else ghost_degree
    report = BuildReport()
    packs = []
    for s in range(n_shards):
        vectors = np.ascontiguousarray(dataset.data[shard_set.rows[s]])
        times = {}
        t0 = time.perf_counter()
        adj = build_knn_graph(vectors, j)
        times["base_graph"] = time.perf_counter() - t0

        inter = None
        t0 = time.perf_counter()
        if n_shards > 1:
            nxt = (s + 1) % n_shards
            dst = np.ascontiguousarray(dataset.data[shard_set.rows[nxt]])
            inter = build_inter_shard_table(vectors, dst)
        times["inter_shard"] = time.perf_counter() - t0

        ghost_ids = ghost_adj = None
        t0 = time.perf_counter()
        if with_ghost and ghost_count(vectors.shape[0], rho) > j_g:
            ghost_ids, ghost_adj = build_ghost_index(vectors, rho, j_g, seed, shard=s)
        times["ghost"] = time.perf_counter() - t0

        direction = None
        t0 = time.perf_counter()
        if with_direction:
            direction = build_direction_table(vectors, adj)
        times["direction"] = time.perf_counter() - t0

        report.base_graph += times["base_graph"]
        report.inter_shard += times["inter_shard"]
        report.ghost += times["ghost"]
        report.direction += times["direction"]
        report.per_shard.append(times)
        packs.append(
            ShardPack(
                global_ids=dataset.ids[shard_set.rows[s]].astype(np.int32),
                adj=adj,
                inter_map=inter,
                ghost_ids=ghost_ids,
                ghost_adj=ghost_adj,
                direction=direction,
            )
        )
    return Index(d=dataset.d, n_total=dataset.n, shards=packs), report
