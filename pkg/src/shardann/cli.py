"""Command-line interface: gen, truth, build, search, eval, bench.

Progress goes to stderr, data to files (or JSON on stdout for eval).  Every
command writes a run manifest next to its primary output: the resolved
config, the run seed, and the index checksum when an index is involved, so
any output can be regenerated from its manifest alone.

A config file may hold any long flag as ``key = value`` lines (``#``
comments allowed, dashes and underscores interchangeable); explicit flags
override config values, which override built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .container import (
    IndexFormatError,
    deserialize_index,
    index_file_checksum,
    serialize_index,
)
from .data import DataFormatError, Dataset, gen_synthetic, load_fvecs, load_ivecs, save_fvecs, save_ivecs
from .graphs import build_index
from .metrics import (
    cost_model_report,
    sweep,
    write_metrics_json,
    write_sweep_csv,
)
from .oracle import exact_knn_batch, load_ground_truth, mean_recall, save_ground_truth
from .pipeline import run_pipelined, run_sharded_baseline
from .search import SearchParams

DEFAULTS = {
    "k": 10,
    "l": 64,
    "m": 64,
    "r": 8,
    "max_iter": 64,
    "seed": 0,
    "selection": "full",
    "discard": 0.0,
    "cooldown": 0.3,
    "ghost": False,
    "ghost_max_iter": 8,
    "seed_mode": "neighbors",
    "degree": 64,
    "shards": 1,
    "rho": 0.01,
    "ghost_degree": None,
    "threads": 1,
    "mode": "baseline",
    "n": 10000,
    "d": 32,
    "clusters": 64,
    "spread": 0.2,
    "queries": 0,
}


class CliError(Exception):
    """User-facing error: printed as one line on stderr, exit code 1."""


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def parse_config_file(path) -> dict:
    """Flat ``key = value`` config; values are parsed as bool/int/float/str."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if value.lower() in ("true", "false"):
            out[key] = value.lower() == "true"
            continue
        for cast in (int, float):
            try:
                out[key] = cast(value)
                break
            except ValueError:
                continue
        else:
            out[key] = value
    return out


def _resolve(args, keys) -> dict:
    """Flag > config file > built-in default, for each requested key."""
    config = parse_config_file(args.config) if getattr(args, "config", None) else {}
    unknown = set(config) - set(DEFAULTS)
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    resolved = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in config:
            resolved[key] = config[key]
        else:
            resolved[key] = DEFAULTS[key]
    return resolved


def _search_params(cfg: dict) -> SearchParams:
    try:
        return SearchParams(
            k=cfg["k"],
            l=cfg["l"],
            m=cfg["m"],
            r=cfg["r"],
            max_iter=cfg["max_iter"],
            seed=cfg["seed"],
            selection=cfg["selection"],
            discard_ratio=cfg["discard"],
            cooldown_ratio=cfg["cooldown"],
            ghost_enabled=cfg["ghost"],
            ghost_max_iter=cfg["ghost_max_iter"],
            seed_mode=cfg["seed_mode"],
        )
    except ValueError as exc:
        raise CliError(f"invalid search parameters: {exc}") from exc


def _write_manifest(primary_output, command: str, cfg: dict, outputs: list,
                    index_checksum: str | None = None) -> None:
    doc = {
        "command": command,
        "config": {k: v for k, v in sorted(cfg.items())},
        "seed": cfg.get("seed"),
        "outputs": [str(o) for o in outputs],
    }
    if index_checksum is not None:
        doc["index_checksum"] = index_checksum
    path = Path(str(primary_output) + ".manifest.json")
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _path(path) -> Path:
    """Resolve a path flag; relative paths honor $SHARDANN_DATA_DIR when set."""
    p = Path(path)
    root = os.environ.get("SHARDANN_DATA_DIR")
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _need_file(path, what: str) -> Path:
    p = _path(path)
    if not p.is_file():
        raise CliError(f"{what} file not found: {p}")
    return p


# --- subcommands ---

def cmd_gen(args) -> int:
    cfg = _resolve(args, ["n", "d", "clusters", "spread", "seed", "queries"])
    nq = cfg["queries"]
    total = cfg["n"] + nq
    _log(f"generating {cfg['n']} base + {nq} query vectors, d={cfg['d']}, "
         f"{cfg['clusters']} clusters, spread={cfg['spread']}, seed={cfg['seed']}")
    dataset = gen_synthetic(total, cfg["d"], cfg["clusters"], cfg["spread"], cfg["seed"])
    out = _path(args.out)
    save_fvecs(dataset.data[: cfg["n"]], out)
    outputs = [out]
    if nq:
        if not args.queries_out:
            raise CliError("--queries-out is required when --queries > 0")
        qout = _path(args.queries_out)
        save_fvecs(dataset.data[cfg["n"] :], qout)
        outputs.append(qout)
    _write_manifest(out, "gen", cfg, outputs)
    return 0


def cmd_truth(args) -> int:
    cfg = _resolve(args, ["k", "seed"])
    data = load_fvecs(_need_file(args.data, "dataset"))
    queries = load_fvecs(_need_file(args.queries, "query"))
    if queries.d != data.d:
        raise CliError(f"query d={queries.d} does not match dataset d={data.d}")
    _log(f"exact kNN ground truth: {queries.n} queries x {data.n} points, k={cfg['k']}")
    t0 = time.perf_counter()
    lists = exact_knn_batch(data, queries, cfg["k"])
    _log(f"oracle done in {time.perf_counter() - t0:.1f}s")
    out_ids, out_dists = _path(args.out_ids), _path(args.out_dists)
    save_ground_truth(lists, out_ids, out_dists)
    _write_manifest(out_ids, "truth", cfg, [out_ids, out_dists])
    return 0


def cmd_build(args) -> int:
    cfg = _resolve(args, ["shards", "degree", "rho", "ghost_degree", "seed"])
    data = load_fvecs(_need_file(args.data, "dataset"))
    _log(f"building index: n={data.n}, d={data.d}, shards={cfg['shards']}, "
         f"degree={cfg['degree']}, rho={cfg['rho']}")
    index, report = build_index(
        data,
        cfg["shards"],
        cfg["degree"],
        cfg["seed"],
        rho=cfg["rho"],
        ghost_degree=cfg["ghost_degree"],
        with_ghost=not args.no_ghost,
        with_direction=not args.no_direction,
    )
    out = _path(args.out)
    serialize_index(index, out)
    checksum = index_file_checksum(out)
    _log("build-time breakdown (s):")
    _log(f"  base graph   {report.base_graph:9.2f}")
    _log(f"  inter-shard  {report.inter_shard:9.2f}")
    _log(f"  ghost        {report.ghost:9.2f}")
    _log(f"  direction    {report.direction:9.2f}")
    _log(f"  total        {report.total:9.2f}  (auxiliary share {report.aux_fraction():.1%})")
    _write_manifest(out, "build", cfg, [out], index_checksum=checksum)
    return 0


def cmd_search(args) -> int:
    keys = ["k", "l", "m", "r", "max_iter", "seed", "selection", "discard",
            "cooldown", "ghost", "ghost_max_iter", "seed_mode", "threads", "mode"]
    cfg = _resolve(args, keys)
    data = load_fvecs(_need_file(args.data, "dataset"))
    queries = load_fvecs(_need_file(args.queries, "query"))
    index = deserialize_index(_need_file(args.index, "index"))
    params = _search_params(cfg)
    runner = run_pipelined if cfg["mode"] == "pipelined" else run_sharded_baseline
    _log(f"search: mode={cfg['mode']}, {queries.n} queries, {index.n_shards} shards, "
         f"threads={cfg['threads']}")
    t0 = time.perf_counter()
    result = runner(queries, index, data, params, threads=cfg["threads"])
    wall = time.perf_counter() - t0
    _log(f"search done in {wall:.1f}s")
    out_ids, out_dists, metrics = _path(args.out_ids), _path(args.out_dists), _path(args.metrics)
    save_ivecs(result.final_ids, out_ids)
    save_fvecs(result.final_dists, out_dists)
    degree = index.shards[0].adj.shape[1]
    cost = cost_model_report(params, index.d, degree, result)
    write_metrics_json(metrics, result, params, cost_model=cost,
                       wall_time_s=wall, config=cfg)
    _write_manifest(
        out_ids, "search", cfg, [out_ids, out_dists, metrics],
        index_checksum=index_file_checksum(_need_file(args.index, "index")),
    )
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve(args, ["k"])
    result_ids = load_ivecs(_need_file(args.results, "results"))
    truth = load_ground_truth(_need_file(args.truth_ids, "ground-truth"))
    if len(truth) != result_ids.shape[0]:
        raise CliError(
            f"results hold {result_ids.shape[0]} queries, truth holds {len(truth)}"
        )
    k = cfg["k"]
    if result_ids.shape[1] < k or len(truth[0].ids) < k:
        raise CliError(f"need at least k={k} entries per query in results and truth")
    hits = [
        np.intersect1d(truth[qi].ids[:k], result_ids[qi, :k]).size / k
        for qi in range(len(truth))
    ]
    report = {"k": k, "queries": len(truth), "recall_at_k": float(np.mean(hits))}
    print(json.dumps(report, sort_keys=True))
    if args.out:
        out = _path(args.out)
        out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        _write_manifest(out, "eval", cfg, [out])
    return 0


def cmd_bench(args) -> int:
    keys = ["k", "l", "m", "r", "max_iter", "seed", "selection", "discard",
            "cooldown", "ghost", "ghost_max_iter", "seed_mode", "threads", "mode"]
    cfg = _resolve(args, keys)
    data = load_fvecs(_need_file(args.data, "dataset"))
    queries = load_fvecs(_need_file(args.queries, "query"))
    index = deserialize_index(_need_file(args.index, "index"))
    truth = load_ground_truth(_need_file(args.truth_ids, "ground-truth"))
    try:
        budgets = [int(b) for b in args.budgets.split(",") if b.strip()]
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError as exc:
        raise CliError(f"budgets/seeds must be comma-separated integers: {exc}") from exc
    if not budgets:
        raise CliError("no budgets given")
    params = _search_params(cfg)
    _log(f"sweep: budgets={budgets}, seeds={seeds}, mode={cfg['mode']}")
    rows = sweep(queries, index, data, truth, params, budgets,
                 mode=cfg["mode"], seeds=seeds, threads=cfg["threads"])
    out = _path(args.out)
    write_sweep_csv(rows, out)
    _write_manifest(out, "bench", cfg, [out],
                    index_checksum=index_file_checksum(_need_file(args.index, "index")))
    return 0


# --- parser ---

def _add_search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, help="results per query (default 10)")
    p.add_argument("--l", type=int, help="priority queue size (default 64)")
    p.add_argument("--m", type=int, help="candidate buffer size (default 64)")
    p.add_argument("--r", type=int, help="parents expanded per iteration (default 8)")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="iteration budget (default 64)")
    p.add_argument("--seed", type=int, help="run seed (default 0)")
    p.add_argument("--selection", choices=["full", "direction", "random"],
                   help="neighbor selection mode (default full)")
    p.add_argument("--discard", type=float, help="discarded neighbor ratio (default 0.0)")
    p.add_argument("--cooldown", type=float, help="cool-down ratio (default 0.3)")
    p.add_argument("--ghost", action=argparse.BooleanOptionalAction, default=None,
                   help="ghost staging before first-stage searches")
    p.add_argument("--ghost-max-iter", dest="ghost_max_iter", type=int,
                   help="ghost stage iteration budget (default 8)")
    p.add_argument("--seed-mode", dest="seed_mode", choices=["neighbors", "mixed"],
                   help="staged seeding: entry + its neighbors, or entry + random fill")
    p.add_argument("--threads", type=int, help="worker parallelism cap (default 1)")
    p.add_argument("--mode", choices=["baseline", "pipelined"],
                   help="multi-shard mode (default baseline)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shardann",
        description="Sharded, pipelined graph ANN search: data, index, search, eval.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic clustered dataset")
    p.add_argument("--out", required=True, help="output fvecs path")
    p.add_argument("--n", type=int, help="base vectors (default 10000)")
    p.add_argument("--d", type=int, help="dimension (default 32)")
    p.add_argument("--clusters", type=int, help="cluster count (default 64)")
    p.add_argument("--spread", type=float, help="per-cluster stddev (default 0.2)")
    p.add_argument("--seed", type=int, help="generator seed (default 0)")
    p.add_argument("--queries", type=int, help="extra query vectors to split off")
    p.add_argument("--queries-out", dest="queries_out", help="query fvecs path")
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("truth", help="exact kNN ground truth (ivecs ids + fvecs dists)")
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, help="neighbors per query (default 10)")
    p.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    p.add_argument("--out-ids", dest="out_ids", required=True)
    p.add_argument("--out-dists", dest="out_dists", required=True)
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_truth)

    p = sub.add_parser("build", help="build and serialize all index structures")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output index container path")
    p.add_argument("--shards", type=int, help="shard count (default 1)")
    p.add_argument("--degree", type=int, help="graph out-degree (default 64)")
    p.add_argument("--rho", type=float, help="ghost sampling ratio (default 0.01)")
    p.add_argument("--ghost-degree", dest="ghost_degree", type=int,
                   help="ghost graph out-degree (default min(degree, 16))")
    p.add_argument("--seed", type=int, help="build seed (default 0)")
    p.add_argument("--no-ghost", action="store_true", help="skip ghost indexes")
    p.add_argument("--no-direction", action="store_true", help="skip direction tables")
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("search", help="run a search and write results + metrics")
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--out-ids", dest="out_ids", required=True)
    p.add_argument("--out-dists", dest="out_dists", required=True)
    p.add_argument("--metrics", required=True, help="metrics JSON path")
    _add_search_flags(p)
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="recall of results against ground truth")
    p.add_argument("--results", required=True, help="results ivecs path")
    p.add_argument("--truth-ids", dest="truth_ids", required=True)
    p.add_argument("--k", type=int, help="recall cut-off (default 10)")
    p.add_argument("--out", help="optional recall report JSON path")
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="budget sweep to CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--truth-ids", dest="truth_ids", required=True)
    p.add_argument("--budgets", required=True, help="comma-separated max-iter grid")
    p.add_argument("--seeds", default="0", help="comma-separated run seeds to average")
    p.add_argument("--out", required=True, help="output CSV path")
    _add_search_flags(p)
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, IndexFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
