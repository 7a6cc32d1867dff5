"""Run instrumentation: visit classification, cost-model report, budget sweeps.

Visit accounting follows the discarded-visit methodology: a visit is a node
whose distance to the query was computed; it is retained if it still sits
in the final priority queue at termination (or in the final top-k under the
alternative classification mode) and discarded otherwise, so

    total_visits = discarded_visits + retained_visits

holds exactly for every run.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import Dataset
from .oracle import NeighborList, mean_recall
from .pipeline import PipelineResult, run_pipelined, run_sharded_baseline

SWEEP_CSV_HEADER = ["budget", "recall", "dist_comps", "total_visits",
                    "discarded_ratio", "comm_bytes"]
METRICS_SCHEMA_VERSION = 1


@dataclass
class RunMetrics:
    """Aggregated counters of one search run."""

    total_visits: int
    discarded_visits: int
    retained_visits: int
    distance_computations: int
    expansion_visits: int           # candidate slots offered by expansions
    comm_bytes: int
    per_stage: list = field(default_factory=list)
    recall: float | None = None
    wall_time_s: float | None = None

    def totals_dict(self) -> dict:
        out = {
            "total_visits": self.total_visits,
            "discarded_visits": self.discarded_visits,
            "retained_visits": self.retained_visits,
            "distance_computations": self.distance_computations,
            "expansion_visits": self.expansion_visits,
            "comm_bytes": self.comm_bytes,
        }
        if self.recall is not None:
            out["recall"] = self.recall
        return out


def classify_visits(result: PipelineResult, mode: str = "queue") -> tuple[int, int]:
    """(total, discarded) visits over a run.

    mode "queue": retained = survivors of the final size-l priority queue;
    mode "topk": retained = entries of the final top-k instead (sensitivity
    check).  Totals count computed distances, including ghost stages.
    """
    if mode not in ("queue", "topk"):
        raise ValueError(f"unknown classification mode {mode!r}")
    total = int(sum(int(s.distance_computations.sum()) for s in result.stages))
    if mode == "queue":
        retained = int(sum(int(s.retained.sum()) for s in result.stages))
    else:
        retained = int((result.shard_ids >= 0).sum())
    return total, total - retained


def collect_metrics(result: PipelineResult, mode: str = "queue") -> RunMetrics:
    """Fold per-stage counters into RunMetrics with the visit identity."""
    total, discarded = classify_visits(result, mode)
    per_stage = []
    for s, st in enumerate(result.stages):
        per_stage.append(
            {
                "stage": s,
                "iterations_mean": float(st.iterations.mean()) if len(st.iterations) else 0.0,
                "ghost_iterations_mean": float(st.ghost_iterations.mean()) if len(st.iterations) else 0.0,
                "iterations_hist": _hist(st.iterations + st.ghost_iterations),
                "distance_computations": int(st.distance_computations.sum()),
                "inserted_counts": int(st.inserted.sum()),
                "total_visits": int(st.total_visits.sum()),
                "comm_bytes": int(result.comm_stage_bytes[s].sum()),
            }
        )
    return RunMetrics(
        total_visits=total,
        discarded_visits=discarded,
        retained_visits=total - discarded,
        distance_computations=total,
        expansion_visits=int(sum(int(s.total_visits.sum()) for s in result.stages)),
        comm_bytes=result.comm_bytes_total,
        per_stage=per_stage,
    )


def _hist(values: np.ndarray) -> dict:
    uniq, counts = np.unique(values, return_counts=True)
    return {int(u): int(c) for u, c in zip(uniq, counts)}


def cost_model_report(params, d: int, degree: int, result: PipelineResult) -> dict:
    """Predicted memory-traffic and communication terms vs measured bytes.

    memory term: mean iterations x degree x queries x d x 4 bytes per element;
    comm term per link: forwarding stages x chunk size x 4 bytes per id.
    Raises if the measured communication differs from the prediction.
    """
    q = result.n_queries
    mean_iters = float(np.mean([s.iterations.mean() for s in result.stages])) if q else 0.0
    mem_bytes = mean_iters * degree * q * d * 4
    n = result.comm_stage_bytes.shape[1]
    if result.mode == "pipelined" and n > 1:
        chunk_sizes = [len(c) for c in np.array_split(np.arange(q), n)]
        predicted_links = np.zeros(n, dtype=np.int64)
        for stage in range(n - 1):
            for chunk in range(n):
                predicted_links[(chunk + stage) % n] += 4 * chunk_sizes[chunk]
    else:
        predicted_links = np.zeros(n, dtype=np.int64)
    measured = result.comm_bytes_per_link
    if not np.array_equal(measured, predicted_links):
        raise RuntimeError(
            f"communication accounting mismatch: measured {measured.tolist()} "
            f"!= predicted {predicted_links.tolist()}"
        )
    return {
        "mean_iterations": mean_iters,
        "memory_traffic_bytes": mem_bytes,
        "comm_bytes_predicted_per_link": predicted_links.tolist(),
        "comm_bytes_measured_per_link": measured.tolist(),
        "comm_bytes_total": int(measured.sum()),
    }


def sweep(
    queries: Dataset,
    index,
    dataset: Dataset,
    truth: list[NeighborList],
    params,
    budgets,
    *,
    mode: str = "baseline",
    seeds=None,
    threads: int = 1,
    contexts=None,
) -> list[dict]:
    """One row per (budget, seed-averaged) grid point: recall and cost counters."""
    if truth is None:
        raise ValueError("sweep requires ground truth")
    runner = run_pipelined if mode == "pipelined" else run_sharded_baseline
    seeds = [params.seed] if seeds is None else list(seeds)
    rows = []
    for budget in budgets:
        recalls, comps, visits, ratios, comm = [], [], [], [], []
        for seed in seeds:
            p = replace(params, max_iter=int(budget), seed=seed)
            result = runner(queries, index, dataset, p, threads=threads, contexts=contexts)
            m = collect_metrics(result)
            recalls.append(mean_recall(truth, result.neighbor_lists(), params.k))
            comps.append(m.distance_computations)
            visits.append(m.total_visits)
            ratios.append(m.discarded_visits / m.total_visits if m.total_visits else 0.0)
            comm.append(m.comm_bytes)
        rows.append(
            {
                "budget": int(budget),
                "recall": float(np.mean(recalls)),
                "dist_comps": int(np.mean(comps)),
                "total_visits": int(np.mean(visits)),
                "discarded_ratio": float(np.mean(ratios)),
                "comm_bytes": int(np.mean(comm)),
            }
        )
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_CSV_HEADER)
        writer.writeheader()
        writer.writerows(rows)


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return [
            {
                "budget": int(row["budget"]),
                "recall": float(row["recall"]),
                "dist_comps": int(row["dist_comps"]),
                "total_visits": int(row["total_visits"]),
                "discarded_ratio": float(row["discarded_ratio"]),
                "comm_bytes": int(row["comm_bytes"]),
            }
            for row in csv.DictReader(f)
        ]


def write_metrics_json(
    path,
    result: PipelineResult,
    params,
    *,
    cost_model: dict | None = None,
    recall: float | None = None,
    wall_time_s: float | None = None,
    config: dict | None = None,
) -> dict:
    """Versioned metrics document; totals are scheduling-independent."""
    metrics = collect_metrics(result)
    metrics.recall = recall
    doc = {
        "schema_version": METRICS_SCHEMA_VERSION,
        "mode": result.mode,
        "run_seed": params.seed,
        "num_queries": result.n_queries,
        "config": config or {},
        "per_stage": metrics.per_stage,
        "totals": metrics.totals_dict(),
        "cost_model": cost_model,
        "wall_time_s": wall_time_s,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    return doc
