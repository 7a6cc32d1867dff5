import numpy as np
import pytest

import shardann as sa
from shardann.rng import TAG_SEARCH, stream
from shardann.search import SearchState


def _line_context(n=10, j=4):
    """Points on a line at x = 0..n-1 with handcrafted nearest-line adjacency."""
    vectors = np.arange(n, dtype=np.float32)[:, None]
    adj = np.empty((n, j), dtype=np.int32)
    for u in range(n):
        others = sorted((abs(v - u), v) for v in range(n) if v != u)
        adj[u] = [v for _, v in others[:j]]
    return sa.ShardContext(vectors=vectors, adj=adj, global_ids=np.arange(n, dtype=np.int32))


def _ctx_from(dataset, j):
    return sa.ShardContext(
        vectors=dataset.data,
        adj=sa.build_knn_graph(dataset.data, j),
        global_ids=dataset.ids,
    )


# --- merge_and_sort ---

def test_merge_into_empty_queue_admits_all():
    st = SearchState(n_local=100, l=8)
    ids = np.array([5, 2, 9])
    dists = np.array([3.0, 1.0, 2.0], dtype=np.float32)
    inserted = st.merge_and_sort(ids, dists)
    assert inserted == 3
    assert [node for _, node in st.queue] == [2, 9, 5]


def test_merge_worse_than_all_inserts_nothing():
    st = SearchState(n_local=100, l=3)
    st.merge_and_sort(np.array([1, 2, 3]), np.array([1.0, 2.0, 3.0], dtype=np.float32))
    before = list(st.queue)
    inserted = st.merge_and_sort(np.array([7]), np.array([9.0], dtype=np.float32))
    assert inserted == 0
    assert st.queue == before


def test_merge_never_double_inserts_queued_ids():
    st = SearchState(n_local=100, l=4)
    st.merge_and_sort(np.array([1]), np.array([5.0], dtype=np.float32))
    st.merge_and_sort(np.array([1, 2]), np.array([0.5, 6.0], dtype=np.float32))
    nodes = [node for _, node in st.queue]
    assert nodes.count(1) == 1


def test_merge_fuzz_against_reference_resort():
    rng = np.random.default_rng(13)
    for _ in range(50):
        l = int(rng.integers(1, 12))
        st = SearchState(n_local=1000, l=l)
        model: list[tuple[float, int]] = []
        for _ in range(6):
            size = int(rng.integers(1, 15))
            ids = rng.integers(0, 40, size)
            dists = rng.random(size).astype(np.float32)
            # contract: drop ids already queued, dedup batch keeping best pair
            queued = {node for _, node in model[:l]}
            batch = {}
            for d, i in sorted(zip(dists.tolist(), ids.tolist())):
                if i not in queued and i not in batch:
                    batch[i] = d
            expect = sorted(model[:l] + [(d, i) for i, d in batch.items()])[:l]
            got_inserted = st.merge_and_sort(ids, dists)
            assert st.queue == expect
            assert got_inserted == sum(1 for _, i in expect if i in batch)
            model = expect


# --- select_parents ---

def test_select_parents_first_r_unexpanded():
    st = SearchState(n_local=100, l=8)
    st.merge_and_sort(np.arange(6), np.arange(6, dtype=np.float32))
    assert st.select_parents(3) == [0, 1, 2]
    st.mark_expanded([0, 1, 2])
    assert st.select_parents(3) == [3, 4, 5]


def test_select_parents_all_expanded_empty():
    st = SearchState(n_local=100, l=8)
    st.merge_and_sort(np.arange(4), np.arange(4, dtype=np.float32))
    st.mark_expanded(range(4))
    assert st.select_parents(2) == []


def test_expanded_flags_persist():
    st = SearchState(n_local=100, l=8)
    st.merge_and_sort(np.arange(4), np.arange(4, dtype=np.float32))
    st.mark_expanded([0])
    st.merge_and_sort(np.array([10]), np.array([0.5], dtype=np.float32))
    assert 0 not in st.select_parents(4)


# --- search end to end ---

def test_complete_graph_equals_exact_knn():
    full = sa.gen_synthetic(64, 8, 4, 0.3, seed=3)
    ctx = _ctx_from(full, 63)
    params = sa.SearchParams(k=10, l=16, m=8, r=2, max_iter=20, seed=5)
    for qi in range(10):
        q = full.data[qi] + 0.01
        res = sa.search(q, ctx, params, seeds=(0,), rng=stream(5, TAG_SEARCH, qi, 0))
        want = sa.exact_knn(full, q, 10)
        assert res.ids.tolist() == want.ids.tolist()
        assert np.array_equal(res.dists, want.dists)
        assert res.converged


def test_single_node_graph():
    ctx = sa.ShardContext(
        vectors=np.array([[1.0, 2.0]], dtype=np.float32),
        adj=np.empty((1, 0), dtype=np.int32),
        global_ids=np.array([7], dtype=np.int32),
    )
    params = sa.SearchParams(k=1, l=4, m=4, r=1, max_iter=8, seed=0)
    res = sa.search(np.array([1.0, 0.0]), ctx, params, rng=stream(0, TAG_SEARCH, 0, 0))
    assert res.ids.tolist() == [7]
    assert res.dists[0] == pytest.approx(2.0)
    assert res.converged


def test_search_deterministic():
    full = sa.gen_synthetic(800, 8, 8, 0.2, seed=7)
    ctx = _ctx_from(full, 8)
    params = sa.SearchParams(k=5, l=16, m=16, r=4, max_iter=12, seed=9)
    a = sa.search(full.data[0], ctx, params, rng=stream(9, TAG_SEARCH, 0, 0))
    b = sa.search(full.data[0], ctx, params, rng=stream(9, TAG_SEARCH, 0, 0))
    assert np.array_equal(a.ids, b.ids)
    assert np.array_equal(a.dists, b.dists)
    assert a.counters == b.counters


def test_visited_set_exactness_and_expansion_bound():
    full = sa.gen_synthetic(800, 8, 8, 0.2, seed=8)
    ctx = _ctx_from(full, 8)
    params = sa.SearchParams(k=5, l=16, m=16, r=4, max_iter=12, seed=2, log_visits=True)
    res = sa.search(full.data[3], ctx, params, rng=stream(2, TAG_SEARCH, 3, 0))
    c = res.counters
    assert res.visited_ids is not None
    assert len(np.unique(res.visited_ids)) == len(res.visited_ids)
    assert c.distance_computations == len(res.visited_ids)
    assert c.total_visits <= c.iterations * params.r * ctx.degree
    assert res.retained <= params.l


def test_oracle_dominance_entrywise():
    full = sa.gen_synthetic(1000, 8, 8, 0.2, seed=10)
    ctx = _ctx_from(full, 8)
    params = sa.SearchParams(k=10, l=16, m=16, r=4, max_iter=6, seed=4)
    for qi in range(10):
        q = full.data[qi * 7] + 0.05
        res = sa.search(q, ctx, params, rng=stream(4, TAG_SEARCH, qi, 0))
        want = sa.exact_knn(full, q, 10)
        assert np.all(res.dists >= want.dists[: len(res.dists)])


def test_best_distance_monotone_in_budget():
    full = sa.gen_synthetic(1000, 8, 8, 0.2, seed=11)
    ctx = _ctx_from(full, 8)
    q = full.data[500] + 0.05
    best = np.inf
    for budget in (1, 2, 3, 4, 6, 8, 12):
        params = sa.SearchParams(k=1, l=16, m=16, r=4, max_iter=budget, seed=6)
        res = sa.search(q, ctx, params, rng=stream(6, TAG_SEARCH, 0, 0))
        assert res.dists[0] <= best + 1e-7
        best = min(best, float(res.dists[0]))


def test_convergence_flag_correctness():
    full = sa.gen_synthetic(2000, 8, 8, 0.2, seed=12)
    ctx = _ctx_from(full, 8)
    tight = sa.SearchParams(k=1, l=32, m=32, r=8, max_iter=1, seed=1)
    res = sa.search(full.data[0], ctx, tight, rng=stream(1, TAG_SEARCH, 0, 0))
    assert not res.converged and res.counters.iterations == 1
    roomy = sa.SearchParams(k=1, l=32, m=32, r=8, max_iter=500, seed=1)
    res2 = sa.search(full.data[0], ctx, roomy, rng=stream(1, TAG_SEARCH, 0, 0))
    assert res2.converged and res2.counters.iterations < 500


def test_invalid_seed_rejected():
    ctx = _line_context()
    params = sa.SearchParams(k=1, l=4, m=4, r=1, max_iter=4, seed=0)
    with pytest.raises(ValueError, match="seed"):
        sa.search(np.zeros(1, np.float32), ctx, params, seeds=(99,),
                  rng=stream(0, TAG_SEARCH, 0, 0))


def test_buffer_cap_keeps_parent_rank_order():
    ctx = _line_context(n=10, j=8)
    params = sa.SearchParams(k=1, l=4, m=1, r=1, max_iter=2, seed=0,
                             buffer_cap=5, log_visits=True)
    res = sa.search(np.zeros(1, np.float32), ctx, params, seeds=(9,),
                    rng=stream(0, TAG_SEARCH, 0, 0))
    # iteration 1 visits the seed; iteration 2 the first 5 slots of node 9's row
    assert res.visited_ids.tolist() == [9] + ctx.adj[9, :5].tolist()
    assert res.counters.total_visits == 5


def test_direction_selection_counters_and_cooldown():
    full = sa.gen_synthetic(600, 16, 8, 0.2, seed=13)
    adj = sa.build_knn_graph(full.data, 8)
    ctx = sa.ShardContext(
        vectors=full.data, adj=adj, global_ids=full.ids,
        direction=sa.build_direction_table(full.data, adj),
    )
    params = sa.SearchParams(k=5, l=16, m=16, r=4, max_iter=8, seed=3,
                             selection="direction", discard_ratio=0.5,
                             cooldown_ratio=1.0)
    res = sa.search(full.data[0], ctx, params, rng=stream(3, TAG_SEARCH, 0, 0))
    assert res.counters.dgs_skipped == 0  # always in cool-down: full expansion
    params2 = params.with_(cooldown_ratio=0.0)
    res2 = sa.search(full.data[0], ctx, params2, rng=stream(3, TAG_SEARCH, 0, 0))
    assert res2.counters.dgs_skipped > 0
    assert res2.counters.dgs_skipped % 4 == 0  # (j - n_keep) = 4 per pruned parent


def test_direction_selection_requires_table():
    ctx = _line_context()
    params = sa.SearchParams(k=1, l=4, m=4, r=1, max_iter=4, seed=0,
                             selection="direction", discard_ratio=0.5)
    with pytest.raises(ValueError, match="direction table"):
        sa.search(np.zeros(1, np.float32), ctx, params, rng=stream(0, TAG_SEARCH, 0, 0))


def test_random_selection_runs_and_prunes():
    full = sa.gen_synthetic(600, 8, 8, 0.2, seed=14)
    ctx = _ctx_from(full, 8)
    params = sa.SearchParams(k=5, l=16, m=16, r=4, max_iter=8, seed=3,
                             selection="random", discard_ratio=0.5, cooldown_ratio=0.0)
    res = sa.search(full.data[0], ctx, params, rng=stream(3, TAG_SEARCH, 0, 0))
    assert res.counters.dgs_skipped > 0


def test_params_validation():
    with pytest.raises(ValueError):
        sa.SearchParams(k=10, l=5)
    with pytest.raises(ValueError):
        sa.SearchParams(r=100, l=50)
    with pytest.raises(ValueError):
        sa.SearchParams(discard_ratio=1.0)
    with pytest.raises(ValueError):
        sa.SearchParams(cooldown_ratio=-0.1)
    with pytest.raises(ValueError):
        sa.SearchParams(selection="best")


def test_empty_graph_rejected():
    ctx = sa.ShardContext(
        vectors=np.empty((0, 2), dtype=np.float32),
        adj=np.empty((0, 0), dtype=np.int32),
        global_ids=np.empty(0, dtype=np.int32),
    )
    params = sa.SearchParams(k=1, l=4, m=4, r=1, max_iter=4, seed=0)
    with pytest.raises(ValueError, match="empty graph"):
        sa.search(np.zeros(2, np.float32), ctx, params, rng=stream(0, TAG_SEARCH, 0, 0))
