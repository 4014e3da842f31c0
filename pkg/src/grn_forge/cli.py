"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 input error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import benchmark as bench
from . import communities as comm
from . import conflicts, learning, merging, pipeline, sampling
from . import expression as expr
from .errors import ConfigError, GrnForgeError, InputError
from .structure import dump_dag, load_dag


def build_parser():
    p = argparse.ArgumentParser(prog="grn-forge", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline")
    run.add_argument("--config", help="key=value config file")
    run.add_argument("--input", help="expression TSV/CSV (overrides config)")
    run.add_argument("--out", help="output directory (overrides config)")
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--threshold", type=float, help="truncate threshold override")
    run.add_argument("--triplet-threshold", type=float)
    run.add_argument("--max-community-size", type=int)
    run.add_argument("--max-depth", type=int)
    run.add_argument("--max-learn-size", type=int)
    run.add_argument("--restarts", type=int)
    run.add_argument("--max-parents", type=int)
    run.add_argument("--dump-intermediate", action="store_true", default=None)
    run.add_argument("--truth", help="ground-truth DAG TSV for recovery metrics")

    c = sub.add_parser("correlate", help="build and prune the co-expression network")
    c.add_argument("--input", required=True)
    c.add_argument("--out", required=True, help="edge-list TSV output")
    c.add_argument("--threshold", type=float, help="default: mean + std of weights")

    pa = sub.add_parser("partition", help="overlapping link communities of an edge list")
    pa.add_argument("--edges", required=True, help="edge-list TSV (a, b, weight)")
    pa.add_argument("--out", required=True, help="communities TSV output")
    pa.add_argument("--max-size", type=int, default=50)
    pa.add_argument("--max-depth", type=int, default=3)

    sa = sub.add_parser("sample", help="blanket-expand and sub-sample communities")
    sa.add_argument("--edges", required=True)
    sa.add_argument("--communities", required=True)
    sa.add_argument("--out", required=True, help="sub-communities TSV output")
    sa.add_argument("--max-learn-size", type=int, default=sampling.DEFAULT_MAX_LEARN_SIZE)
    sa.add_argument("--seed", type=int, default=0)

    le = sub.add_parser("learn", help="hill-climb a Gaussian BN over a gene subset")
    le.add_argument("--input", required=True)
    le.add_argument("--genes", help="comma-separated gene ids (default: all)")
    le.add_argument("--out", required=True, help="DAG TSV output")
    le.add_argument("--seed", type=int, default=0)
    le.add_argument("--restarts", type=int, default=learning.DEFAULT_RESTARTS)
    le.add_argument("--max-parents", type=int, default=learning.DEFAULT_MAX_PARENTS)

    me = sub.add_parser("merge", help="greedy-merge learned community DAGs")
    me.add_argument("--input", required=True, help="expression table")
    me.add_argument("--edges", required=True, help="pruned reference edge list")
    me.add_argument("--dags", required=True, nargs="+", help="DAG TSV files")
    me.add_argument("--out", required=True, help="merged network TSV output")
    me.add_argument("--tree", help="optional merge-tree JSON output")
    me.add_argument("--seed", type=int, default=0)
    me.add_argument("--restarts", type=int, default=learning.DEFAULT_RESTARTS)
    me.add_argument("--max-parents", type=int, default=learning.DEFAULT_MAX_PARENTS)

    be = sub.add_parser("benchmark", help="generate a synthetic linear-Gaussian benchmark")
    be.add_argument("--n", type=int, required=True)
    be.add_argument("--avg-degree", type=float, default=2.0)
    be.add_argument("--samples", type=int, default=500)
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--out-dir", required=True)

    ev = sub.add_parser("eval", help="score a predicted network against ground truth")
    ev.add_argument("--predicted", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--out", help="metrics JSON output (default: stdout)")
    return p


def _cmd_run(args):
    cfg = pipeline.load_config(args.config) if args.config else pipeline.PipelineConfig()
    overrides = {
        "input": args.input,
        "out_dir": args.out,
        "seed": args.seed,
        "workers": args.workers,
        "truncate_threshold": args.threshold,
        "triplet_threshold": args.triplet_threshold,
        "max_community_size": args.max_community_size,
        "max_depth": args.max_depth,
        "max_learn_size": args.max_learn_size,
        "restarts": args.restarts,
        "max_parents": args.max_parents,
        "dump_intermediate": args.dump_intermediate,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    if cfg.input is None:
        raise ConfigError("an input expression file is required (--input or config)")
    truth = load_dag(args.truth) if args.truth else None
    dag, _manifest = pipeline.run_pipeline(cfg.validate(), truth=truth)
    print(f"wrote {cfg.out_dir}/network.tsv ({dag.n_edges} edges over {len(dag.nodes)} genes)")


def _cmd_correlate(args):
    m = expr.load_expression(args.input)
    net = expr.build_correlation_network(m)
    t = args.threshold if args.threshold is not None else expr.default_threshold(net)
    pruned = expr.prune(net, t)
    expr.dump_edges(pruned, args.out)
    print(f"threshold {t:.6g}; kept {pruned.n_edges} of {net.n_edges} edges")


def _cmd_partition(args):
    net = expr.load_edges(args.edges)
    partition = comm.partition_recursive(net, max_size=args.max_size, max_depth=args.max_depth)
    comm.dump_communities(partition, args.out)
    print(f"{len(partition.communities)} communities ({len(partition.leaves())} leaves)")


def _cmd_sample(args):
    net = expr.load_edges(args.edges)
    partition = comm.load_communities(args.communities)
    all_samples = []
    for c in partition.leaves():
        if len(c.members) < 2:
            continue
        expanded = sampling.expand(c, net)
        all_samples.extend(
            sampling.rnn_sample(
                expanded,
                net,
                max_learn_size=args.max_learn_size,
                seed=pipeline.stable_seed(args.seed, "sample", c.id),
            )
        )
    sampling.dump_subcommunities(all_samples, args.out)
    print(f"{len(all_samples)} sub-communities")


def _cmd_learn(args):
    m = expr.load_expression(args.input)
    genes = args.genes.split(",") if args.genes else list(m.gene_ids)
    dag = learning.hill_climb(
        m, genes, seed=args.seed, restarts=args.restarts, max_parents=args.max_parents
    )
    score = learning.dag_score(dag, m)
    dump_dag(dag, args.out, score=score)
    print(f"{dag.n_edges} edges, score {score:.6g}")


def _cmd_merge(args):
    m = expr.load_expression(args.input)
    ref = expr.load_edges(args.edges)
    leaves = []
    for i, path in enumerate(sorted(args.dags)):
        dag = load_dag(path)
        leaves.append((comm.Community(id=f"d{i}", members=frozenset(dag.nodes)), dag))
    final, tree, _report = merging.merge_all(
        leaves, m, ref, seed=args.seed, restarts=args.restarts, max_parents=args.max_parents
    )
    pipeline.write_network(final, args.out)
    if args.tree:
        with open(args.tree, "w") as fh:
            json.dump(tree, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"merged {len(leaves)} networks into {final.n_edges} edges")


def _cmd_benchmark(args):
    import os

    os.makedirs(args.out_dir, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    dag = bench.generate_dag(args.n, args.avg_degree, rng=rng)
    model = bench.random_model(dag, rng=rng)
    matrix = bench.sample_expression(model, args.samples, rng=rng)
    bench.dump_ground_truth(model, os.path.join(args.out_dir, "truth.tsv"))
    with open(os.path.join(args.out_dir, "expression.tsv"), "w") as fh:
        header = "\t".join(["gene"] + [f"s{j}" for j in range(matrix.n_samples)])
        fh.write(header + "\n")
        for g in matrix.gene_ids:
            row = "\t".join(f"{x:.12g}" for x in matrix.row(g))
            fh.write(f"{g}\t{row}\n")
    print(f"wrote {args.out_dir}/truth.tsv and expression.tsv "
          f"({dag.n_edges} true edges, {args.n} genes)")


def _cmd_eval(args):
    truth = load_dag(args.truth)
    predicted = load_dag(args.predicted)
    if set(predicted.nodes) != set(truth.nodes):
        # network.tsv carries no node header; pad with the truth universe
        # when the prediction's nodes are a subset of it
        if set(predicted.nodes) <= set(truth.nodes):
            from .structure import Dag

            predicted = Dag(truth.nodes, predicted.edges)
    metrics = bench.evaluate(predicted, truth).to_dict()
    text = json.dumps(metrics, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


_COMMANDS = {
    "run": _cmd_run,
    "correlate": _cmd_correlate,
    "partition": _cmd_partition,
    "sample": _cmd_sample,
    "learn": _cmd_learn,
    "merge": _cmd_merge,
    "benchmark": _cmd_benchmark,
    "eval": _cmd_eval,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (InputError, OSError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 3
    except (GrnForgeError, AssertionError) as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
