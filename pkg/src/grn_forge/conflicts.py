"""Integration of overlapping learned sub-networks with conflict repair.

Sub-network DAGs are unioned with per-edge support counts; opposite
orientations are settled by majority, strongly-connected triplet regions are
re-clustered and re-learned to remove indirect-interaction edges and recover
missed ones, and any remaining directed cycles are broken at their
lowest-confidence edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import communities as comm
from . import learning
from .expression import WeightedGeneNetwork
from .errors import InputError
from .structure import Dag, find_cycle


@dataclass(frozen=True)
class Triplet:
    nodes: tuple  # sorted triple of gene ids

    def __post_init__(self):
        if len(self.nodes) != 3 or tuple(sorted(self.nodes)) != self.nodes:
            raise InputError("triplet must be a sorted 3-tuple")


@dataclass
class ConflictReport:
    opposite_orientations: list = field(default_factory=list)  # (kept, dropped)
    cycles_broken: list = field(default_factory=list)  # (edge, support)
    triplets_processed: int = 0
    relearn_removed: list = field(default_factory=list)
    relearn_added: list = field(default_factory=list)

    def to_dict(self):
        return {
            "opposite_orientations": [
                {"kept": list(k), "dropped": list(d)} for k, d in self.opposite_orientations
            ],
            "cycles_broken": [
                {"edge": list(e), "support": s} for e, s in self.cycles_broken
            ],
            "triplets_processed": self.triplets_processed,
            "relearn_removed": [list(e) for e in self.relearn_removed],
            "relearn_added": [list(e) for e in self.relearn_added],
        }


def integrate(subnets, reference=None):
    """Union the sub-network edges, resolving opposite orientations.

    Returns ``(nodes, support, report)`` where ``support`` maps each kept
    directed edge to the number of sub-networks containing it. The graph may
    still be cyclic; see ``enforce_acyclicity``.
    """
    nodes = set()
    support = {}
    for net in subnets:
        nodes.update(net.nodes)
        for e in net.edges:
            support[e] = support.get(e, 0) + 1

    report = ConflictReport()
    for u, v in sorted(support):
        rev = (v, u)
        if (u, v) not in support or rev not in support:
            continue
        if support[(u, v)] > support[rev]:
            kept, dropped = (u, v), rev
        elif support[(u, v)] < support[rev]:
            kept, dropped = rev, (u, v)
        else:
            # equal support; reference weight is orientation-symmetric, so
            # fall through to the lexicographically smaller orientation
            kept, dropped = ((u, v), rev) if (u, v) < rev else (rev, (u, v))
        del support[dropped]
        report.opposite_orientations.append((kept, dropped))
    return nodes, support, report


def find_candidate_triplets(graph, t):
    """All node triples whose three mutual edges each weigh >= t."""
    if t < 0:
        raise InputError("triplet threshold must be >= 0")
    strong = {n: {m for m, w in graph.neighbors(n).items() if w >= t} for n in graph.nodes}
    triplets = []
    for a, b in graph.edges():
        if graph.weight(a, b) < t:
            continue
        for c in sorted(strong[a] & strong[b]):
            if c > b:
                triplets.append(Triplet(nodes=(a, b, c)))
    return sorted(triplets, key=lambda t: t.nodes)


def triplet_graph(triplets):
    """Undirected unweighted graph of all edges appearing in a triplet."""
    weights = {}
    nodes = set()
    for t in triplets:
        a, b, c = t.nodes
        for e in ((a, b), (a, c), (b, c)):
            weights[e] = 1.0
            nodes.update(e)
    return WeightedGeneNetwork(tuple(sorted(nodes)), weights)


def relearn_conflicts(
    triplets,
    data,
    support,
    seed=0,
    restarts=learning.DEFAULT_RESTARTS,
    max_parents=learning.DEFAULT_MAX_PARENTS,
    max_cluster_size=None,
    report=None,
):
    """Re-learn densely connected triplet regions and splice the results in.

    The triplet edges form an undirected graph that is link-clustered into
    dense subgraphs; each cluster's node set is re-learned from data, and the
    learned edges replace all integrated edges internal to that cluster.
    Mutates ``support`` in place and returns it.
    """
    if report is None:
        report = ConflictReport()
    report.triplets_processed += len(triplets)
    if not triplets:
        return support, report

    tg = triplet_graph(triplets)
    partition = comm.cut_by_partition_density(comm.cluster_links(tg), tg, id_prefix="t")
    clusters = sorted(
        {frozenset(c.members) for c in partition.communities}, key=lambda s: sorted(s)
    )
    for i, cluster in enumerate(clusters):
        if len(cluster) < 2:
            continue
        if max_cluster_size is not None and len(cluster) > max_cluster_size:
            continue  # leave huge clusters as integrated
        sub_seed = _stable_seed(seed, "relearn", i)
        dag = learning.hill_climb(
            data, sorted(cluster), seed=sub_seed, restarts=restarts, max_parents=max_parents
        )
        learned = set(dag.edges)
        internal_old = {
            e for e in support if e[0] in cluster and e[1] in cluster
        }
        for e in sorted(internal_old - learned):
            report.relearn_removed.append(e)
            del support[e]
        for e in sorted(learned - internal_old):
            report.relearn_added.append(e)
            support[e] = 1
    return support, report


def enforce_acyclicity(nodes, support, reference=None, report=None):
    """Break directed cycles at the lowest-confidence edge.

    Confidence is (support count, reference edge weight, lexicographic edge);
    the minimal edge of each detected cycle is removed until acyclic.
    """
    if report is None:
        report = ConflictReport()
    edges = dict(support)

    def confidence(e):
        w = 0.0
        if reference is not None and reference.has_edge(*e):
            w = reference.weight(*e)
        return (edges[e], w, e)

    while True:
        cycle = find_cycle(nodes, edges)
        if cycle is None:
            break
        victim = min(cycle, key=confidence)
        report.cycles_broken.append((victim, edges[victim]))
        del edges[victim]
    return Dag(nodes, edges.keys()), report


def _stable_seed(*parts):
    import hashlib

    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def resolve(
    subnets,
    data,
    reference,
    triplet_threshold=None,
    seed=0,
    restarts=learning.DEFAULT_RESTARTS,
    max_parents=learning.DEFAULT_MAX_PARENTS,
    max_cluster_size=None,
):
    """Full repair pipeline: integrate -> triplet re-learn -> acyclicity.

    ``reference`` is the pruned weighted network restricted (implicitly) to
    the genes of interest; the triplet threshold defaults to the mean + one
    population std of the reference subgraph's edge weights.
    """
    nodes, support, report = integrate(subnets, reference)
    ref_sub = reference.subgraph(set(nodes) & set(reference.nodes))
    if triplet_threshold is None:
        w = list(ref_sub.weights.values())
        if len(w) >= 2:
            arr = np.asarray(w)
            triplet_threshold = float(arr.mean() + arr.std())
        else:
            triplet_threshold = 0.0
    triplets = find_candidate_triplets(ref_sub, triplet_threshold)
    support, report = relearn_conflicts(
        triplets,
        data,
        support,
        seed=seed,
        restarts=restarts,
        max_parents=max_parents,
        max_cluster_size=max_cluster_size,
        report=report,
    )
    return enforce_acyclicity(nodes, support, reference=ref_sub, report=report)
