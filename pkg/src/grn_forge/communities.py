"""Overlapping community detection by link clustering.

Edges (not nodes) are clustered by single-linkage agglomeration on the
inclusive-neighbor Jaccard similarity of adjacent edge pairs; the dendrogram
is cut at the level maximizing partition density. Node communities are the
node sets induced by each link cluster, so nodes may belong to several
communities while each edge belongs to exactly one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EmptyGraph, InputError, NotAdjacent

# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class Community:
    id: str
    members: frozenset
    parent: str | None = None
    depth: int = 0
    oversized: bool = False  # true when recursion stopped without shrinking it

    def __post_init__(self):
        if not self.members:
            raise InputError("community members must be non-empty")


@dataclass
class LinkDendrogram:
    """Single-linkage merge history over the edges of a graph.

    Leaf cluster i is ``leaves[i]``; merge step k creates cluster
    ``len(leaves) + k`` from the two listed cluster ids at the given
    similarity height.
    """

    leaves: list  # edge tuples (a, b), a < b
    merges: list  # (cluster_id_a, cluster_id_b, height), heights non-increasing
    cut_level: int | None = None  # number of merges applied at the chosen cut

    def n_clusters_at(self, level):
        return len(self.leaves) - level

    def clusters_at(self, level):
        """Edge sets of the clusters after applying the first ``level`` merges."""
        if not 0 <= level <= len(self.merges):
            raise InputError(f"level {level} out of range")
        clusters = {i: [e] for i, e in enumerate(self.leaves)}
        nxt = len(self.leaves)
        for a, b, _h in self.merges[:level]:
            clusters[nxt] = clusters.pop(a) + clusters.pop(b)
            nxt += 1
        return [sorted(edges) for edges in clusters.values()]


@dataclass
class CommunityPartition:
    communities: list  # Community, hierarchy included
    coverage: dict = field(default_factory=dict)  # gene id -> set of community ids

    def __post_init__(self):
        if not self.coverage:
            self.coverage = {}
            for c in self.communities:
                for g in c.members:
                    self.coverage.setdefault(g, set()).add(c.id)

    def by_id(self, cid):
        for c in self.communities:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def leaves(self):
        """Communities with no children, in id order."""
        parents = {c.parent for c in self.communities if c.parent is not None}
        return [c for c in sorted(self.communities, key=lambda c: c.id) if c.id not in parents]


# ---------------------------------------------------------------------------
# operations


def _inclusive_neighbors(graph, x):
    return frozenset(graph.neighbors(x)) | {x}


def edge_similarity(graph, e1, e2):
    """Jaccard of the inclusive neighborhoods of the two non-shared endpoints."""
    s1, s2 = set(e1), set(e2)
    shared = s1 & s2
    if len(shared) != 1 or s1 == s2:
        raise NotAdjacent(f"edges {e1} and {e2} do not share exactly one endpoint")
    (i,) = s1 - shared
    (j,) = s2 - shared
    ni = _inclusive_neighbors(graph, i)
    nj = _inclusive_neighbors(graph, j)
    return len(ni & nj) / len(ni | nj)


def cluster_links(graph):
    """Single-linkage agglomeration of edges by edge_similarity.

    Ties are broken by the lexicographically smallest (edge id, edge id)
    pair, with edge ids assigned by sorted endpoint order, so the dendrogram
    is deterministic.
    """
    edges = graph.edges()
    if not edges:
        raise EmptyGraph("link clustering needs at least one edge")
    edge_id = {e: i for i, e in enumerate(edges)}

    incident = {n: [] for n in graph.nodes}
    for e in edges:
        incident[e[0]].append(edge_id[e])
        incident[e[1]].append(edge_id[e])

    neigh_cache = {n: _inclusive_neighbors(graph, n) for n in graph.nodes}

    pairs = []
    for k in sorted(incident):
        ids = sorted(incident[k])
        for ai in range(len(ids)):
            for bi in range(ai + 1, len(ids)):
                e1, e2 = edges[ids[ai]], edges[ids[bi]]
                i = e1[0] if e1[1] == k else e1[1]
                j = e2[0] if e2[1] == k else e2[1]
                ni, nj = neigh_cache[i], neigh_cache[j]
                sim = len(ni & nj) / len(ni | nj)
                pairs.append((-sim, ids[ai], ids[bi]))
    pairs.sort()

    parent = list(range(len(edges)))
    cluster_of = list(range(len(edges)))  # root -> current cluster id

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    merges = []
    next_id = len(edges)
    for neg_sim, a, b in pairs:
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        ca, cb = cluster_of[ra], cluster_of[rb]
        parent[ra] = rb
        cluster_of[rb] = next_id
        merges.append((min(ca, cb), max(ca, cb), -neg_sim))
        next_id += 1
    return LinkDendrogram(leaves=list(edges), merges=merges)


def _density_term(m_c, n_c):
    # clusters inducing <= 2 nodes contribute zero
    if n_c <= 2:
        return 0.0
    return m_c * (m_c - (n_c - 1)) / ((n_c - 2) * (n_c - 1))


def partition_density(clusters, total_edges):
    """D = (2/M) * sum_c m_c (m_c - (n_c-1)) / ((n_c-2)(n_c-1))."""
    total = 0.0
    for edges in clusters:
        nodes = set()
        for a, b in edges:
            nodes.update((a, b))
        total += _density_term(len(edges), len(nodes))
    return 2.0 * total / total_edges


def cut_by_partition_density(dendrogram, graph, id_prefix="c"):
    """Cut the dendrogram at the partition-density maximum.

    Ties between equal-density levels prefer the finer cut (more clusters).
    Node communities are the node sets induced by each link cluster.
    """
    leaves = dendrogram.leaves
    n_leaves = len(leaves)
    if n_leaves == 0:
        raise EmptyGraph("empty dendrogram")

    # incremental scan over levels 0..K
    edge_count = {i: 1 for i in range(n_leaves)}
    node_sets = {i: set(e) for i, e in enumerate(leaves)}
    total = 0.0  # all leaf clusters have n_c = 2 -> zero terms
    best_level, best_d = 0, 2.0 * total / n_leaves
    nxt = n_leaves
    for level, (a, b, _h) in enumerate(dendrogram.merges, start=1):
        total -= _density_term(edge_count[a], len(node_sets[a]))
        total -= _density_term(edge_count[b], len(node_sets[b]))
        na, nb = node_sets.pop(a), node_sets.pop(b)
        if len(na) < len(nb):
            na, nb = nb, na
        na |= nb
        node_sets[nxt] = na
        edge_count[nxt] = edge_count.pop(a) + edge_count.pop(b)
        total += _density_term(edge_count[nxt], len(node_sets[nxt]))
        nxt += 1
        d = 2.0 * total / n_leaves
        if d > best_d:
            best_d, best_level = d, level

    dendrogram.cut_level = best_level
    member_sets = sorted(
        {frozenset(ns) for ns in _node_sets_at(dendrogram, best_level)},
        key=lambda s: sorted(s),
    )
    communities = [
        Community(id=f"{id_prefix}{i}", members=ms) for i, ms in enumerate(member_sets)
    ]
    return CommunityPartition(communities=communities)


def _node_sets_at(dendrogram, level):
    out = []
    for edges in dendrogram.clusters_at(level):
        nodes = set()
        for a, b in edges:
            nodes.update((a, b))
        out.append(nodes)
    return out


def partition_recursive(graph, max_size=50, max_depth=3):
    """Link-community partition, re-partitioning oversized communities.

    Communities larger than ``max_size`` are re-clustered on their induced
    subgraph until they fit, recursion bottoms out at ``max_depth``, or no
    progress is made (a community re-partitions into itself); such leftovers
    are flagged ``oversized`` and left to downstream sampling. Isolated
    nodes become singleton communities (reported, never learned over).
    """
    if max_size < 3:
        raise InputError("max_size must be >= 3")

    all_communities = []

    def descend(sub, community, depth):
        """Re-partition an oversized ``community`` on its induced subgraph."""
        child = cut_by_partition_density(cluster_links(sub), sub, id_prefix="t")
        if len(child.communities) == 1 and child.communities[0].members == community.members:
            all_communities.append(
                Community(id=community.id, members=community.members, parent=community.parent,
                          depth=depth, oversized=True)
            )
            return
        all_communities.append(
            Community(id=community.id, members=community.members, parent=community.parent, depth=depth)
        )
        for j, cc in enumerate(sorted(child.communities, key=lambda x: sorted(x.members))):
            cid = f"{community.id}.{j}"
            if len(cc.members) <= max_size or depth + 1 >= max_depth:
                all_communities.append(
                    Community(id=cid, members=cc.members, parent=community.id, depth=depth + 1,
                              oversized=len(cc.members) > max_size)
                )
            else:
                descend(sub.subgraph(cc.members),
                        Community(id=cid, members=cc.members, parent=community.id, depth=depth + 1),
                        depth + 1)

    if graph.n_edges == 0:
        communities = [
            Community(id=f"iso{i}", members=frozenset({n}))
            for i, n in enumerate(sorted(graph.nodes))
        ]
        return CommunityPartition(communities=communities)

    top = cut_by_partition_density(cluster_links(graph), graph)
    for c in sorted(top.communities, key=lambda x: x.id):
        if len(c.members) <= max_size:
            all_communities.append(c)
        elif max_depth == 0:
            all_communities.append(
                Community(id=c.id, members=c.members, depth=0, oversized=True)
            )
        else:
            descend(graph.subgraph(c.members), Community(id=c.id, members=c.members, depth=0), 0)

    isolated = [n for n in sorted(graph.nodes) if graph.degree(n) == 0]
    for i, n in enumerate(isolated):
        all_communities.append(Community(id=f"iso{i}", members=frozenset({n})))

    return CommunityPartition(communities=all_communities)


def dump_communities(partition, path):
    """TSV dump: community_id, depth, parent_id, comma-separated members."""
    with open(path, "w") as fh:
        for c in sorted(partition.communities, key=lambda c: c.id):
            members = ",".join(sorted(c.members))
            fh.write(f"{c.id}\t{c.depth}\t{c.parent or '-'}\t{members}\n")


def load_communities(path):
    communities = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cid, depth, parent, members = line.split("\t")
            communities.append(
                Community(
                    id=cid,
                    members=frozenset(members.split(",")),
                    parent=None if parent == "-" else parent,
                    depth=int(depth),
                )
            )
    return CommunityPartition(communities=communities)
