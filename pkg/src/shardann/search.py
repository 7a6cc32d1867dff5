"""Per-query beam search kernel over one shard graph.

The kernel keeps a priority queue of the best l nodes seen so far and a
candidate buffer refilled each iteration from the unexpanded top-r queue
entries' adjacency rows.  Termination: an iteration that inserts nothing
new into the top-l (or exhausts unexpanded parents) converges the search;
otherwise it stops at the iteration budget.

All node ids inside the kernel are shard-local; results are translated to
global ids on the way out.  Distances are squared float32 internally, true
norms at the API boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import squared_l2
from .direction import (
    in_cooldown,
    keep_count,
    matching_count,
    pack_sign_bits,
    random_slots,
    select_neighbors,
)

SELECTION_MODES = ("full", "direction", "random")

# How a staged search is seeded when an entry node was handed in:
# "neighbors" starts from the entry plus its adjacency row only, so the
# search continues from where the previous stage pointed; "mixed" keeps the
# entry and refills the buffer with random nodes like a first stage.
SEED_MODES = ("neighbors", "mixed")


@dataclass(frozen=True)
class SearchParams:
    """Knobs of one search: sizes, budget, seeding, and neighbor selection."""

    k: int = 10
    l: int = 64
    m: int = 64
    r: int = 8
    max_iter: int = 64
    seed: int = 0
    selection: str = "full"
    discard_ratio: float = 0.0
    cooldown_ratio: float = 0.3
    ghost_enabled: bool = False
    ghost_max_iter: int = 8
    seed_mode: str = "neighbors"
    buffer_cap: int | None = None  # expansion batch cap; default max(m, r * degree)
    log_visits: bool = False

    def __post_init__(self):
        if not (1 <= self.k <= self.l and 1 <= self.r <= self.l):
            raise ValueError(f"need k <= l and r <= l, got k={self.k} l={self.l} r={self.r}")
        if self.m < 1 or self.max_iter < 1 or self.ghost_max_iter < 1:
            raise ValueError("m, max_iter and ghost_max_iter must be >= 1")
        if not 0.0 <= self.discard_ratio < 1.0:
            raise ValueError(f"discard_ratio must be in [0, 1), got {self.discard_ratio}")
        if not 0.0 <= self.cooldown_ratio <= 1.0:
            raise ValueError(f"cooldown_ratio must be in [0, 1], got {self.cooldown_ratio}")
        if self.selection not in SELECTION_MODES:
            raise ValueError(f"selection must be one of {SELECTION_MODES}")
        if self.seed_mode not in SEED_MODES:
            raise ValueError(f"seed_mode must be one of {SEED_MODES}")

    def with_(self, **kw) -> "SearchParams":
        return replace(self, **kw)


@dataclass
class SearchCounters:
    """Instrumentation of one search.

    distance_computations counts unique nodes whose distance was computed
    (exactly the visited-set size).  total_visits counts candidate slots
    offered by expansions after in-batch dedup, so it is bounded by
    iterations * r * degree; the step-2 random fill is not an expansion and
    is excluded.
    """

    iterations: int = 0
    distance_computations: int = 0
    total_visits: int = 0
    nodes_expanded: int = 0
    dgs_skipped: int = 0
    inserted_total: int = 0

    def merge(self, other: "SearchCounters") -> None:
        self.iterations += other.iterations
        self.distance_computations += other.distance_computations
        self.total_visits += other.total_visits
        self.nodes_expanded += other.nodes_expanded
        self.dgs_skipped += other.dgs_skipped
        self.inserted_total += other.inserted_total


@dataclass(frozen=True)
class SearchResult:
    """Top-k of one search with its instrumentation snapshot."""

    query_id: int
    ids: np.ndarray          # (<=k,) int32 global ids, ascending (distance, id)
    dists: np.ndarray        # (<=k,) float32 true distances
    local_ids: np.ndarray    # (<=k,) int32 shard-local ids
    converged: bool
    counters: SearchCounters
    retained: int            # non-dummy entries in the final priority queue
    visited_ids: np.ndarray | None = None  # only when log_visits


@dataclass(frozen=True)
class GhostContext:
    """Sampled sub-graph searched before the main stage to pick an entry node.

    global_ids of the ghost context are parent-shard local ids, so the
    ghost top-1 maps to the parent graph by identity.
    """

    vectors: np.ndarray   # (g, d) float32, gathered contiguous
    adj: np.ndarray       # (g, j_g) int32 ghost-local ids
    parent_ids: np.ndarray  # (g,) int32 parent-shard local ids


@dataclass(frozen=True)
class ShardContext:
    """Read-only per-shard search state: vectors, graph, and side tables."""

    vectors: np.ndarray              # (n_local, d) float32
    adj: np.ndarray                  # (n_local, j) int32
    global_ids: np.ndarray           # (n_local,) int32
    direction: np.ndarray | None = None  # (n_local, j, W) uint32
    inter_map: np.ndarray | None = None  # (n_local,) int32 local ids in next shard
    ghost: GhostContext | None = None

    @property
    def n_local(self) -> int:
        return self.vectors.shape[0]

    @property
    def degree(self) -> int:
        return self.adj.shape[1]

    def ghost_as_context(self) -> "ShardContext":
        g = self.ghost
        return ShardContext(vectors=g.vectors, adj=g.adj, global_ids=g.parent_ids)


class SearchState:
    """Priority queue + visited set + counters of one in-flight search.

    The queue holds at most l (distance, local id) pairs sorted ascending;
    missing entries stand for the dummy +inf slots.  A node's distance is
    computed at most once (visited-set guarantee).
    """

    def __init__(self, n_local: int, l: int):
        self.l = l
        self.queue: list[tuple[float, int]] = []
        self.queue_ids: set[int] = set()
        self.expanded: set[int] = set()
        self.visited = np.zeros(n_local, dtype=bool)
        self.counters = SearchCounters()

    def merge_and_sort(self, ids: np.ndarray, sq_dists: np.ndarray) -> int:
        """Admit scored candidates; keep the best l by (distance, id).

        Returns the number of new ids that ended up inside the top-l.
        Candidates whose id is already queued are never double-inserted;
        duplicate ids within the batch keep their best pair.
        """
        incoming: list[tuple[float, int]] = []
        seen: set[int] = set()
        for dist, node in sorted(zip(sq_dists.tolist(), ids.tolist())):
            if node in self.queue_ids or node in seen:
                continue
            seen.add(node)
            incoming.append((dist, node))
        merged = sorted(self.queue + incoming)
        del merged[self.l :]
        self.queue = merged
        self.queue_ids = {node for _, node in merged}
        inserted = sum(1 for _, node in merged if node in seen)
        self.counters.inserted_total += inserted
        return inserted

    def select_parents(self, r: int) -> list[int]:
        """The r best-ranked queue entries not yet expanded (fewer if exhausted)."""
        parents = []
        for _, node in self.queue:
            if node not in self.expanded:
                parents.append(node)
                if len(parents) == r:
                    break
        return parents

    def mark_expanded(self, nodes) -> None:
        self.expanded.update(nodes)
        self.counters.nodes_expanded += len(nodes)


def _initial_batch(seeds, n_local: int, m: int, rng: np.random.Generator,
                   fill_random: bool) -> np.ndarray:
    """Step-2 candidate buffer: seeds first, then distinct random ids up to m.

    Staged searches seeded in "neighbors" mode skip the random fill: the
    buffer is exactly the handed-in entry set (capped at m).
    """
    seeds = [int(s) for s in seeds]
    for s in seeds:
        if not 0 <= s < n_local:
            raise ValueError(f"seed {s} outside shard of {n_local} nodes")
    want = min(m, n_local)
    batch = list(dict.fromkeys(seeds))[:want]
    if fill_random and len(batch) < want:
        taken = set(batch)
        for cand in rng.choice(n_local, size=want, replace=False).tolist():
            if cand not in taken:
                batch.append(cand)
                if len(batch) == want:
                    break
    return np.asarray(batch, dtype=np.int64)


def _ordered_unique(ids: np.ndarray) -> np.ndarray:
    _, first = np.unique(ids, return_index=True)
    return ids[np.sort(first)]


def _expand(
    ctx: ShardContext,
    state: SearchState,
    query: np.ndarray,
    params: SearchParams,
    parents: list[int],
    iteration: int,
    rng: np.random.Generator,
    cap: int,
) -> np.ndarray:
    """Step 4: selected neighbor slots of the parents, deduped and capped."""
    parr = np.asarray(parents, dtype=np.int64)
    rows = ctx.adj[parr]  # (p, j) in parent-rank order
    j = rows.shape[1]
    prune = (
        params.selection != "full"
        and params.discard_ratio > 0.0
        and not in_cooldown(iteration, params.max_iter, params.cooldown_ratio)
    )
    if prune:
        n_keep = keep_count(j, params.discard_ratio)
        if params.selection == "direction":
            qbits = pack_sign_bits(query >= ctx.vectors[parr])  # (p, W)
            counts = matching_count(ctx.direction[parr], qbits[:, None, :], query.shape[0])
            slots = select_neighbors(counts, n_keep)  # (p, n_keep)
        else:
            slots = np.stack([random_slots(j, n_keep, rng) for _ in range(len(parents))])
        rows = np.take_along_axis(rows, slots, axis=1)
        state.counters.dgs_skipped += len(parents) * (j - n_keep)
    batch = _ordered_unique(rows.ravel().astype(np.int64))[:cap]
    state.counters.total_visits += len(batch)
    return batch


def search(
    query: np.ndarray,
    ctx: ShardContext,
    params: SearchParams,
    seeds=(),
    *,
    rng: np.random.Generator,
    query_id: int = 0,
) -> SearchResult:
    """One beam search over a shard; see module docstring for the loop."""
    if ctx.n_local == 0:
        raise ValueError("empty graph")
    query = np.asarray(query, dtype=np.float32)
    if query.shape != (ctx.vectors.shape[1],):
        raise ValueError(
            f"query dimension {query.shape} does not match shard d={ctx.vectors.shape[1]}"
        )
    if params.selection == "direction" and params.discard_ratio > 0.0 and ctx.direction is None:
        raise ValueError("direction table required for direction-guided selection")

    cap = params.buffer_cap or max(params.m, params.r * ctx.degree)
    state = SearchState(ctx.n_local, params.l)
    counters = state.counters
    visit_log: list[np.ndarray] = []

    fill_random = params.seed_mode == "mixed" or not len(seeds)
    batch = _initial_batch(seeds, ctx.n_local, params.m, rng, fill_random)
    converged = False
    for iteration in range(params.max_iter):
        counters.iterations += 1
        # Step 3: score unvisited candidates, fold them into the queue.
        new = batch[~state.visited[batch]]
        if new.size:
            sq = squared_l2(ctx.vectors[new], query)
            state.visited[new] = True
            counters.distance_computations += new.size
            if params.log_visits:
                visit_log.append(new.astype(np.int32))
            inserted = state.merge_and_sort(new, sq)
        else:
            inserted = 0
        if inserted == 0:
            converged = True
            break
        if iteration == params.max_iter - 1:
            break  # budget exhausted; a trailing expansion would never be scored
        # Step 4: refill the buffer from the unexpanded top-r parents.
        parents = state.select_parents(params.r)
        if not parents:
            converged = True
            break
        state.mark_expanded(parents)
        batch = _expand(ctx, state, query, params, parents, iteration, rng, cap)

    top = state.queue[: params.k]
    local = np.asarray([node for _, node in top], dtype=np.int32)
    dists = np.sqrt(np.asarray([dist for dist, _ in top], dtype=np.float32))
    return SearchResult(
        query_id=query_id,
        ids=ctx.global_ids[local] if local.size else local,
        dists=dists,
        local_ids=local,
        converged=converged,
        counters=counters,
        retained=len(state.queue),
        visited_ids=np.concatenate(visit_log) if params.log_visits and visit_log else None,
    )
