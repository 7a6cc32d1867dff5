"""Multi-shard search orchestration.

Two modes over the same per-shard indexes:

* baseline: every query runs an independent random-seeded search in every
  shard; no messages are exchanged.
* pipelined: queries are split into N chunks on a ring of shard workers.
  After each stage a worker forwards, per query, the single best local
  node translated through its inter-shard table; the next worker seeds its
  search with that entry.  Only the 4-byte entry id crosses a link.

Both modes end with the same reduction: the k best of the N shard-local
top-k lists by (distance, id).  All randomness is derived from
(run seed, query id, stage index), so results do not depend on worker
scheduling; a sequential loop (threads=1) and the threaded ring produce
identical output.
"""

from __future__ import annotations

import queue as queue_mod
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .graphs import Index
from .oracle import NeighborList
from .rng import TAG_GHOST_SEARCH, TAG_SEARCH, stream
from .search import (
    GhostContext,
    SearchCounters,
    SearchParams,
    ShardContext,
    search,
)

_BASELINE_BLOCK = 256  # queries per baseline task


@dataclass(frozen=True)
class StageMessage:
    """Per-chunk forwarding payload: one entry node id per query.

    entries is None only for the synthetic stage-0 kickoff message; a real
    forwarded message carries chunk_size 4-byte local ids of the receiving
    shard and nothing else.
    """

    stage: int
    chunk: int
    entries: np.ndarray | None  # (chunk_size,) int32 local ids in the receiving shard

    @property
    def payload_bytes(self) -> int:
        return 0 if self.entries is None else 4 * len(self.entries)


@dataclass
class StageStats:
    """Per-query counters of one stage (or of one shard in baseline mode)."""

    iterations: np.ndarray
    ghost_iterations: np.ndarray
    distance_computations: np.ndarray
    total_visits: np.ndarray
    inserted: np.ndarray
    retained: np.ndarray
    dgs_skipped: np.ndarray
    converged: np.ndarray

    @classmethod
    def empty(cls, q: int) -> "StageStats":
        return cls(
            iterations=np.zeros(q, np.int32),
            ghost_iterations=np.zeros(q, np.int32),
            distance_computations=np.zeros(q, np.int64),
            total_visits=np.zeros(q, np.int64),
            inserted=np.zeros(q, np.int64),
            retained=np.zeros(q, np.int32),
            dgs_skipped=np.zeros(q, np.int64),
            converged=np.zeros(q, bool),
        )


@dataclass
class PipelineResult:
    """Shard-local candidate lists, the reduced top-k, and all counters."""

    mode: str
    k: int
    shard_ids: np.ndarray     # (Q, N, k) int32 global ids, -1 pads short lists
    shard_dists: np.ndarray   # (Q, N, k) float32, +inf pads
    final_ids: np.ndarray     # (Q, k) int32
    final_dists: np.ndarray   # (Q, k) float32
    stages: list
    comm_stage_bytes: np.ndarray  # (N_stages, N) int64, link s -> s+1 per stage

    @property
    def n_queries(self) -> int:
        return self.shard_ids.shape[0]

    @property
    def comm_bytes_per_link(self) -> np.ndarray:
        return self.comm_stage_bytes.sum(axis=0)

    @property
    def comm_bytes_total(self) -> int:
        return int(self.comm_stage_bytes.sum())

    def neighbor_lists(self) -> list[NeighborList]:
        out = []
        for qi in range(self.n_queries):
            valid = self.final_ids[qi] >= 0
            out.append(NeighborList(qi, self.final_ids[qi][valid], self.final_dists[qi][valid]))
        return out


def build_contexts(index: Index, dataset: Dataset) -> list[ShardContext]:
    """Attach dataset vectors to the serialized per-shard structures."""
    if dataset.d != index.d:
        raise ValueError(f"dataset d={dataset.d} does not match index d={index.d}")
    if dataset.n != index.n_total:
        raise ValueError(f"dataset n={dataset.n} does not match index n={index.n_total}")
    order = np.argsort(dataset.ids, kind="stable")
    sorted_ids = dataset.ids[order]
    contexts = []
    for pack in index.shards:
        pos = np.searchsorted(sorted_ids, pack.global_ids)
        if pos.max(initial=-1) >= dataset.n or not np.array_equal(
            sorted_ids[pos], pack.global_ids
        ):
            raise ValueError("index global ids not present in dataset")
        rows = order[pos]
        vectors = np.ascontiguousarray(dataset.data[rows])
        ghost = None
        if pack.ghost_ids is not None:
            ghost = GhostContext(
                vectors=np.ascontiguousarray(vectors[pack.ghost_ids]),
                adj=pack.ghost_adj,
                parent_ids=pack.ghost_ids,
            )
        contexts.append(
            ShardContext(
                vectors=vectors,
                adj=pack.adj,
                global_ids=pack.global_ids,
                direction=pack.direction,
                inter_map=pack.inter_map,
                ghost=ghost,
            )
        )
    return contexts


def run_ghost_stage(
    query: np.ndarray,
    ctx: ShardContext,
    params: SearchParams,
    *,
    rng: np.random.Generator,
    query_id: int = 0,
) -> tuple[int, SearchCounters]:
    """Search the ghost sub-graph and return the entry node for the main stage.

    The returned id is a parent-shard local id (ghost nodes are members of
    the parent shard, so the transition is the identity mapping).
    """
    if ctx.ghost is None:
        raise ValueError("ghost index absent for this shard")
    gctx = ctx.ghost_as_context()
    gparams = params.with_(
        k=1,
        max_iter=params.ghost_max_iter,
        selection="full",
        discard_ratio=0.0,
        ghost_enabled=False,
        log_visits=False,
        buffer_cap=None,
    )
    res = search(query, gctx, gparams, rng=rng, query_id=query_id)
    return int(res.ids[0]), res.counters


def reduce_topk(ids: np.ndarray, dists: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Best k of the concatenated candidate lists by (distance, id)."""
    ids = np.asarray(ids).ravel()
    dists = np.asarray(dists).ravel()
    valid = ids >= 0
    ids, dists = ids[valid], dists[valid]
    if ids.size == 0:
        raise ValueError("cannot reduce empty candidate lists")
    order = np.lexsort((ids, dists))[:k]
    return ids[order].astype(np.int32), dists[order].astype(np.float32)


class _Run:
    """Shared mutable output arrays; all writes are disjoint per (query, stage)."""

    def __init__(self, mode, queries, contexts, params, n_stages):
        self.mode = mode
        self.queries = queries
        self.contexts = contexts
        self.params = params
        q, n = queries.n, len(contexts)
        self.shard_ids = np.full((q, n, params.k), -1, np.int32)
        self.shard_dists = np.full((q, n, params.k), np.inf, np.float32)
        self.stages = [StageStats.empty(q) for _ in range(n_stages)]
        self.comm_stage_bytes = np.zeros((n_stages, n), np.int64)

    def search_one(self, qid: int, shard: int, stage: int, seeds) -> "SearchResult":
        params = self.params
        ctx = self.contexts[shard]
        query = self.queries.data[qid]
        stats = self.stages[stage]
        if params.ghost_enabled and not seeds and ctx.ghost is not None:
            entry, gcounters = run_ghost_stage(
                query, ctx, params,
                rng=stream(params.seed, TAG_GHOST_SEARCH, qid, stage), query_id=qid,
            )
            seeds = (entry,)
            stats.ghost_iterations[qid] += gcounters.iterations
            stats.distance_computations[qid] += gcounters.distance_computations
            stats.total_visits[qid] += gcounters.total_visits
        if seeds and params.seed_mode == "neighbors":
            # continue from the entry: its adjacency row joins the buffer in
            # place of the random fill
            seeds = [int(s) for s in seeds]
            seeds = seeds + [int(v) for s in seeds for v in ctx.adj[s]]
        res = search(
            query, ctx, params, seeds,
            rng=stream(params.seed, TAG_SEARCH, qid, stage), query_id=qid,
        )
        c = res.counters
        stats.iterations[qid] += c.iterations
        stats.distance_computations[qid] += c.distance_computations
        stats.total_visits[qid] += c.total_visits
        stats.inserted[qid] += c.inserted_total
        stats.retained[qid] += res.retained
        stats.dgs_skipped[qid] += c.dgs_skipped
        stats.converged[qid] = res.converged
        nk = len(res.ids)
        self.shard_ids[qid, shard, :nk] = res.ids
        self.shard_dists[qid, shard, :nk] = res.dists
        return res

    def finish(self) -> PipelineResult:
        q = self.queries.n
        k = self.params.k
        final_ids = np.full((q, k), -1, np.int32)
        final_dists = np.full((q, k), np.inf, np.float32)
        for qi in range(q):
            ids, dists = reduce_topk(self.shard_ids[qi], self.shard_dists[qi], k)
            final_ids[qi, : len(ids)] = ids
            final_dists[qi, : len(ids)] = dists
        return PipelineResult(
            mode=self.mode,
            k=k,
            shard_ids=self.shard_ids,
            shard_dists=self.shard_dists,
            final_ids=final_ids,
            final_dists=final_dists,
            stages=self.stages,
            comm_stage_bytes=self.comm_stage_bytes,
        )


def run_sharded_baseline(
    queries: Dataset,
    index: Index,
    dataset: Dataset,
    params: SearchParams,
    threads: int = 1,
    contexts: list | None = None,
) -> PipelineResult:
    """Independent random-seeded search of every query in every shard.

    The stage axis of the result indexes shards; no bytes are communicated.
    With ghost staging enabled, each independent search runs its ghost
    stage first (every baseline search is a first stage).
    """
    contexts = contexts if contexts is not None else build_contexts(index, dataset)
    n = len(contexts)
    run = _Run("baseline", queries, contexts, params, n_stages=n)

    tasks = [
        (s, lo, min(lo + _BASELINE_BLOCK, queries.n))
        for s in range(n)
        for lo in range(0, queries.n, _BASELINE_BLOCK)
    ]

    def do(task):
        s, lo, hi = task
        for qid in range(lo, hi):
            run.search_one(qid, shard=s, stage=s, seeds=())

    if threads <= 1:
        for task in tasks:
            do(task)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(do, tasks))
    return run.finish()


def run_pipelined(
    queries: Dataset,
    index: Index,
    dataset: Dataset,
    params: SearchParams,
    threads: int = 1,
    contexts: list | None = None,
) -> PipelineResult:
    """Ring-pipelined search: chunk c starts at shard c and follows the ring.

    Stage s of chunk c runs in shard (c + s) % N.  After every stage but
    the last, the sender translates each query's best local node through
    its own inter-shard table and forwards one 4-byte id per query.
    """
    contexts = contexts if contexts is not None else build_contexts(index, dataset)
    n = len(contexts)
    if n > 1 and any(ctx.inter_map is None for ctx in contexts):
        raise ValueError("pipelined mode requires inter-shard tables for every shard")
    run = _Run("pipelined", queries, contexts, params, n_stages=n)
    chunks = np.array_split(np.arange(queries.n), n)

    def process(chunk: int, stage: int, entries) -> np.ndarray | None:
        shard = (chunk + stage) % n
        ctx = contexts[shard]
        qids = chunks[chunk]
        forward = stage < n - 1
        out = np.empty(len(qids), np.int32) if forward else None
        for i, qid in enumerate(qids):
            seeds = () if entries is None else (int(entries[i]),)
            res = run.search_one(int(qid), shard=shard, stage=stage, seeds=seeds)
            if forward:
                out[i] = ctx.inter_map[res.local_ids[0]]
        if forward:
            run.comm_stage_bytes[stage, shard] = 4 * len(qids)
        return out

    if threads <= 1 or n == 1:
        entries: list = [None] * n
        for stage in range(n):
            entries = [process(c, stage, entries[c]) for c in range(n)]
    else:
        _run_ring(process, n, threads)
    return run.finish()


def _run_ring(process, n: int, threads: int) -> None:
    """N ring workers over bounded queues; a semaphore caps concurrent searches.

    Each worker handles exactly one chunk per stage (N messages).  On error
    a dummy message still moves down the ring so every worker terminates;
    the first error is re-raised after the join.
    """
    inboxes: list[queue_mod.Queue] = [queue_mod.Queue(maxsize=n) for _ in range(n)]
    gate = threading.Semaphore(max(1, threads))
    errors: list[BaseException] = []

    def worker(w: int) -> None:
        for _ in range(n):
            msg: StageMessage = inboxes[w].get()
            out = None
            if not errors:
                try:
                    with gate:
                        out = process(msg.chunk, msg.stage, msg.entries)
                except BaseException as exc:  # propagate after join
                    errors.append(exc)
            if msg.stage < n - 1:
                inboxes[(w + 1) % n].put(StageMessage(msg.stage + 1, msg.chunk, out))

    workers = [threading.Thread(target=worker, args=(w,)) for w in range(n)]
    for w in range(n):
        inboxes[w].put(StageMessage(0, w, None))
    for t in workers:
        t.start()
    for t in workers:
        t.join()
    if errors:
        raise errors[0]
