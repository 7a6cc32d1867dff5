"""Sharded, pipelined graph-based approximate nearest neighbor search.

A numpy library plus a small CLI.  The pieces:

* data: fvecs/ivecs I/O, synthetic clustered datasets, the L2 primitive
* oracle: exact brute-force kNN ground truth and recall@k
* graphs: shard partitioning, exact kNN graphs, inter-shard tables,
  ghost indexes, packed direction tables
* container: versioned, checksummed binary index files
* search: the per-shard beam search kernel with instrumentation
* direction: sign-bit packing and agreement-based neighbor selection
* pipeline: baseline sharded search and ring-pipelined multi-shard search
* metrics: visit classification, cost-model report, budget sweeps
"""

from .container import (
    ChecksumError,
    IndexFormatError,
    VersionError,
    deserialize_index,
    index_equal,
    index_file_checksum,
    serialize_index,
)
from .data import (
    DataFormatError,
    Dataset,
    gen_synthetic,
    l2_distance,
    load_fvecs,
    load_ivecs,
    save_fvecs,
    save_ivecs,
    squared_l2,
)
from .direction import (
    in_cooldown,
    keep_count,
    matching_count,
    pack_sign_bits,
    query_direction_bits,
    select_neighbors,
    unpack_sign_bits,
    words_per_vector,
)
from .graphs import (
    BuildReport,
    Index,
    ShardPack,
    ShardSet,
    build_direction_table,
    build_ghost_index,
    build_index,
    build_inter_shard_table,
    build_knn_graph,
    ghost_count,
    partition,
)
from .metrics import (
    RunMetrics,
    classify_visits,
    collect_metrics,
    cost_model_report,
    sweep,
    write_metrics_json,
    write_sweep_csv,
)
from .oracle import (
    NeighborList,
    exact_knn,
    exact_knn_batch,
    load_ground_truth,
    mean_recall,
    recall_at_k,
    save_ground_truth,
)
from .pipeline import (
    PipelineResult,
    StageMessage,
    StageStats,
    build_contexts,
    reduce_topk,
    run_ghost_stage,
    run_pipelined,
    run_sharded_baseline,
)
from .search import (
    GhostContext,
    SearchCounters,
    SearchParams,
    SearchResult,
    SearchState,
    ShardContext,
    search,
)

__version__ = "0.1.0"
