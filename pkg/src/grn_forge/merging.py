"""Greedy pairwise merge of intra-community networks.

Communities are merged Huffman-style: the pair with the highest Jaccard
similarity over member-gene sets is combined first, its networks are unioned
and repaired with the same conflict-resolution pipeline, and the merged node
re-enters the pool until one network remains.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from . import conflicts
from .errors import EmptySets, InputError


@dataclass
class MergeNode:
    id: str
    genes: frozenset
    network: object  # Dag
    children: tuple | None = None  # (id, id) or None for a leaf
    jaccard_at_merge: float | None = None


def jaccard(a, b):
    """|a ∩ b| / |a ∪ b|; undefined for two empty sets."""
    a, b = set(a), set(b)
    union = a | b
    if not union:
        raise EmptySets("jaccard of two empty sets")
    return len(a & b) / len(union)


def merge_all(
    leaves,
    data,
    reference,
    seed=0,
    restarts=5,
    max_parents=4,
    triplet_threshold=None,
    max_cluster_size=None,
):
    """Merge (Community, Dag) leaves into a single global DAG.

    Pair priority: highest Jaccard, then larger intersection, then the
    lexicographically smallest pair id; zero-overlap pairs are ordered by
    smallest combined member count so disjoint regions stay small for as
    long as possible. Returns ``(dag, merge_tree, report)`` where the merge
    tree lists every node with its children and merge-time Jaccard.
    """
    if not leaves:
        raise InputError("merge_all needs at least one leaf")

    pool = {}
    for community, dag in sorted(leaves, key=lambda cd: cd[0].id):
        if community.id in pool:
            raise InputError(f"duplicate leaf community id {community.id!r}")
        pool[community.id] = MergeNode(
            id=community.id, genes=frozenset(community.members), network=dag
        )
    tree = {nid: node for nid, node in pool.items()}

    heap = []

    def push_pairs(new_id):
        new = pool[new_id]
        for other_id in sorted(pool):
            if other_id == new_id:
                continue
            other = pool[other_id]
            inter = len(new.genes & other.genes)
            sim = inter / len(new.genes | other.genes)
            pair = tuple(sorted((new_id, other_id)))
            size_rank = len(new.genes) + len(other.genes) if sim == 0.0 else 0
            heapq.heappush(heap, (-sim, -inter, size_rank, pair))

    ids = sorted(pool)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            inter = len(pool[a].genes & pool[b].genes)
            sim = inter / len(pool[a].genes | pool[b].genes)
            size_rank = len(pool[a].genes) + len(pool[b].genes) if sim == 0.0 else 0
            heapq.heappush(heap, (-sim, -inter, size_rank, (a, b)))

    total_report = conflicts.ConflictReport()
    counter = 0
    while len(pool) > 1:
        neg_sim, _neg_inter, _size, (a, b) = heapq.heappop(heap)
        if a not in pool or b not in pool:
            continue  # stale pair
        na, nb = pool.pop(a), pool.pop(b)
        merged_id = f"m{counter}"
        counter += 1
        dag, report = conflicts.resolve(
            [na.network, nb.network],
            data,
            reference,
            triplet_threshold=triplet_threshold,
            seed=conflicts._stable_seed(seed, "merge", merged_id),
            restarts=restarts,
            max_parents=max_parents,
            max_cluster_size=max_cluster_size,
        )
        _accumulate(total_report, report)
        node = MergeNode(
            id=merged_id,
            genes=na.genes | nb.genes,
            network=dag,
            children=(a, b),
            jaccard_at_merge=-neg_sim,
        )
        pool[merged_id] = node
        tree[merged_id] = node
        push_pairs(merged_id)

    (root,) = pool.values()
    return root.network, _tree_dict(tree, root.id), total_report


def _accumulate(total, part):
    total.opposite_orientations.extend(part.opposite_orientations)
    total.cycles_broken.extend(part.cycles_broken)
    total.triplets_processed += part.triplets_processed
    total.relearn_removed.extend(part.relearn_removed)
    total.relearn_added.extend(part.relearn_added)


def _tree_dict(tree, root_id):
    return {
        "root": root_id,
        "nodes": [
            {
                "id": n.id,
                "children": list(n.children) if n.children else None,
                "jaccard": n.jaccard_at_merge,
                "n_genes": len(n.genes),
            }
            for n in sorted(tree.values(), key=lambda n: n.id)
        ],
    }
