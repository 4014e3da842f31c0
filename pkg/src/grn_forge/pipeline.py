"""End-to-end pipeline: correlate -> partition -> sample -> learn -> resolve -> merge.

Learning tasks are pure functions of (data slice, derived seed), so a bounded
process pool can execute them in any order and the reduced result is
identical for any worker count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import communities as comm
from . import conflicts, learning, merging, sampling
from . import expression as expr
from .benchmark import evaluate
from .errors import ConfigError, InputError
from .structure import Dag, dump_dag


def stable_seed(*parts):
    """Scheduling-independent 64-bit seed from (global seed, stage, task id)."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class PipelineConfig:
    input: str | None = None
    out_dir: str = "."
    input_format: str | None = None  # tsv/csv; sniffed from extension if None
    truncate_threshold: float | None = None  # default: mean + std of weights
    max_community_size: int = 50
    max_depth: int = 3
    max_learn_size: int = sampling.DEFAULT_MAX_LEARN_SIZE
    restarts: int = learning.DEFAULT_RESTARTS
    max_parents: int = learning.DEFAULT_MAX_PARENTS
    triplet_threshold: float | None = None
    seed: int = 0
    workers: int = 1
    dump_intermediate: bool = False

    def validate(self):
        for name in ("restarts", "max_parents", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")
        if self.max_community_size < 3:
            raise ConfigError("max_community_size must be >= 3")
        if self.max_learn_size < 3:
            raise ConfigError("max_learn_size must be >= 3")
        for name in ("truncate_threshold", "triplet_threshold"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"{name} must be >= 0")
        return self

    def snapshot(self):
        return dataclasses.asdict(self)


_INT_FIELDS = {
    "max_community_size", "max_depth", "max_learn_size",
    "restarts", "max_parents", "seed", "workers",
}
_FLOAT_FIELDS = {"truncate_threshold", "triplet_threshold"}
_BOOL_FIELDS = {"dump_intermediate"}


def load_config(path):
    """Flat key=value config file; '#' starts a comment."""
    cfg = PipelineConfig()
    valid = {f.name for f in dataclasses.fields(PipelineConfig)}
    try:
        lines = open(path).read().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from None
    for i, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in valid:
            raise ConfigError(f"{path}:{i}: unknown key {key!r}")
        try:
            if key in _INT_FIELDS:
                value = int(value)
            elif key in _FLOAT_FIELDS:
                value = float(value)
            elif key in _BOOL_FIELDS:
                value = value.lower() in ("1", "true", "yes")
        except ValueError:
            raise ConfigError(f"{path}:{i}: bad value for {key}: {value!r}") from None
        setattr(cfg, key, value)
    return cfg.validate()


def _learn_task(payload):
    gene_ids, values, seed, restarts, max_parents = payload
    data = expr.ExpressionMatrix(tuple(gene_ids), values)
    dag = learning.hill_climb(
        data, gene_ids, seed=seed, restarts=restarts, max_parents=max_parents
    )
    return sorted(dag.edges)


class _Stopwatch:
    def __init__(self, manifest):
        self.manifest = manifest

    def stage(self, name, **counts):
        entry = {"name": name, "seconds": None, **counts}
        self.manifest["stages"].append(entry)
        entry["_t0"] = time.perf_counter()
        return entry

    @staticmethod
    def done(entry, **counts):
        entry["seconds"] = round(time.perf_counter() - entry.pop("_t0"), 4)
        entry.update(counts)


def run_pipeline(config, matrix=None, truth=None):
    """Run the full pipeline and write outputs into ``config.out_dir``.

    ``matrix`` may be passed directly instead of ``config.input``; ``truth``
    is an optional ground-truth Dag for recovery metrics. Returns
    ``(final_dag, manifest_dict)``.
    """
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    manifest = {"config": config.snapshot(), "stages": []}
    watch = _Stopwatch(manifest)
    inter_dir = os.path.join(config.out_dir, "intermediate")
    if config.dump_intermediate:
        os.makedirs(inter_dir, exist_ok=True)

    try:
        dag, manifest = _run_stages(config, matrix, truth, manifest, watch, inter_dir)
    except Exception as e:
        manifest["failed_stage"] = manifest["stages"][-1]["name"] if manifest["stages"] else None
        manifest["error"] = f"{type(e).__name__}: {e}"
        for entry in manifest["stages"]:
            entry.pop("_t0", None)
        _write_json(manifest, os.path.join(config.out_dir, "manifest.json"))
        raise
    return dag, manifest


def _run_stages(config, matrix, truth, manifest, watch, inter_dir):
    # stage 1: correlation network
    st = watch.stage("correlate")
    if matrix is None:
        if config.input is None:
            raise ConfigError("no input path and no in-memory matrix given")
        matrix = expr.load_expression(config.input, fmt=config.input_format)
    constant = expr.find_constant_genes(matrix)
    network = expr.build_correlation_network(matrix)
    if config.truncate_threshold is not None:
        threshold = config.truncate_threshold
    elif network.n_edges >= 2:
        threshold = expr.default_threshold(network)
    else:
        threshold = 0.0
    pruned = expr.prune(network, threshold)
    manifest["constant_genes_excluded"] = sorted(constant)
    watch.done(st, n_genes=matrix.n_genes, n_samples=matrix.n_samples,
               threshold=threshold, edges_kept=pruned.n_edges)
    if config.dump_intermediate:
        expr.dump_edges(pruned, os.path.join(inter_dir, "pruned_edges.tsv"))

    # stage 2: overlapping communities
    st = watch.stage("partition")
    partition = comm.partition_recursive(
        pruned, max_size=config.max_community_size, max_depth=config.max_depth
    )
    leaves = [c for c in partition.leaves() if len(c.members) >= 2]
    isolated = sorted(
        g for c in partition.communities if len(c.members) == 1 for g in c.members
    )
    manifest["isolated_singletons"] = isolated
    watch.done(st, n_communities=len(partition.communities), n_leaves=len(leaves))
    if config.dump_intermediate:
        comm.dump_communities(partition, os.path.join(inter_dir, "communities.tsv"))

    # stage 3: blanket expansion + RNN sampling
    st = watch.stage("sample")
    samples_by_leaf = {}
    for c in leaves:
        expanded = sampling.expand(c, pruned)
        samples_by_leaf[c.id] = sampling.rnn_sample(
            expanded,
            pruned,
            max_learn_size=config.max_learn_size,
            seed=stable_seed(config.seed, "sample", c.id),
        )
    n_samples_total = sum(len(v) for v in samples_by_leaf.values())
    watch.done(st, n_subcommunities=n_samples_total)
    if config.dump_intermediate:
        flat = [s for cid in sorted(samples_by_leaf) for s in samples_by_leaf[cid]]
        sampling.dump_subcommunities(flat, os.path.join(inter_dir, "subcommunities.tsv"))

    # stage 4: per-sub-community structure learning (parallel)
    st = watch.stage("learn")
    tasks = []
    for cid in sorted(samples_by_leaf):
        for s in samples_by_leaf[cid]:
            genes = tuple(sorted(s.members))
            sub = matrix.subset(genes)
            tasks.append(
                (
                    (cid, s.provenance[1]),
                    (
                        genes,
                        sub.values,
                        stable_seed(config.seed, "learn", cid, s.provenance[1]),
                        config.restarts,
                        config.max_parents,
                    ),
                )
            )
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_learn_task, [p for _k, p in tasks], chunksize=1))
    else:
        results = [_learn_task(p) for _k, p in tasks]
    subnets_by_leaf = {cid: [] for cid in samples_by_leaf}
    for (cid, _idx), payload, edges in zip(
        [k for k, _p in tasks], [p for _k, p in tasks], results
    ):
        subnets_by_leaf[cid].append(Dag(payload[0], edges))
    watch.done(st, n_tasks=len(tasks))

    # stage 5: intra-community integration + conflict repair
    st = watch.stage("resolve")
    community_nets = []
    reports = {}
    for c in sorted(leaves, key=lambda c: c.id):
        dag, report = conflicts.resolve(
            subnets_by_leaf[c.id],
            matrix,
            pruned,
            triplet_threshold=config.triplet_threshold,
            seed=stable_seed(config.seed, "resolve", c.id),
            restarts=config.restarts,
            max_parents=config.max_parents,
            max_cluster_size=config.max_learn_size,
        )
        community_nets.append((c, dag))
        reports[c.id] = report.to_dict()
    manifest["community_conflict_reports"] = reports
    watch.done(st, n_community_networks=len(community_nets))
    if config.dump_intermediate:
        for c, dag in community_nets:
            safe = c.id.replace("/", "_")
            dump_dag(dag, os.path.join(inter_dir, f"community_{safe}_dag.tsv"))

    # stage 6: global greedy merge
    st = watch.stage("merge")
    if community_nets:
        final, tree, merge_report = merging.merge_all(
            community_nets,
            matrix,
            pruned,
            seed=config.seed,
            restarts=config.restarts,
            max_parents=config.max_parents,
            triplet_threshold=config.triplet_threshold,
            max_cluster_size=config.max_learn_size,
        )
        manifest["merge_conflict_report"] = merge_report.to_dict()
    else:
        final, tree = Dag(()), {"root": None, "nodes": []}
        manifest["merge_conflict_report"] = conflicts.ConflictReport().to_dict()
    watch.done(st, n_merges=max(0, len(community_nets) - 1), n_edges=final.n_edges)

    write_network(final, os.path.join(config.out_dir, "network.tsv"))
    _write_json(tree, os.path.join(config.out_dir, "merge_tree.json"))

    if truth is not None:
        padded = Dag(truth.nodes, final.edges)
        metrics = evaluate(padded, truth).to_dict()
        manifest["metrics"] = metrics
        _write_json(metrics, os.path.join(config.out_dir, "metrics.json"))

    _write_json(manifest, os.path.join(config.out_dir, "manifest.json"))
    return final, manifest


def write_network(dag, path):
    """Final network as plain parent<TAB>child lines, sorted."""
    with open(path, "w") as fh:
        for u, v in dag.sorted_edges():
            fh.write(f"{u}\t{v}\n")


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
