"""Markov-blanket expansion and random-node-neighbor sub-sampling.

Each community is first expanded with its candidate Markov blanket (strongly
attached outside neighbors). If the expanded community is still too big for
structure learning, it is covered by sub-communities grown around randomly
picked start nodes together with their neighbors and blankets, trimmed back
to the size limit by dropping the weakest neighbors first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DEFAULT_MAX_LEARN_SIZE = 30


@dataclass(frozen=True)
class MarkovBlanketSet:
    target: str | frozenset
    members: frozenset


@dataclass(frozen=True)
class ExpandedCommunity:
    base: object  # Community
    blanket: MarkovBlanketSet
    members: frozenset


@dataclass(frozen=True)
class SubCommunity:
    seed_set: frozenset
    members: frozenset
    provenance: tuple  # (community id, sample index, rng seed)


def mb_candidates_node(graph, x):
    """Neighbors of ``x`` whose edge weight is >= mean + population std
    of x's incident edge weights.

    With all incident weights equal the threshold degenerates to the mean,
    so every neighbor is retained (>= boundary).
    """
    neigh = graph.neighbors(x)
    if not neigh:
        return MarkovBlanketSet(target=x, members=frozenset())
    w = np.fromiter(neigh.values(), dtype=np.float64, count=len(neigh))
    thr = float(w.mean() + w.std())
    members = frozenset(y for y, wy in neigh.items() if wy >= thr)
    return MarkovBlanketSet(target=x, members=members)


def mb_of_set(graph, c):
    """Union of the members' per-node blanket candidates, minus the set itself."""
    c = frozenset(c)
    if not c:
        raise ConfigError("mb_of_set needs a non-empty set")
    members = set()
    for x in c:
        members |= mb_candidates_node(graph, x).members
    return MarkovBlanketSet(target=c, members=frozenset(members - c))


def expand(community, graph):
    blanket = mb_of_set(graph, community.members)
    return ExpandedCommunity(
        base=community,
        blanket=blanket,
        members=community.members | blanket.members,
    )


def rnn_sample(expanded, graph, max_learn_size=DEFAULT_MAX_LEARN_SIZE, rng=None, seed=None):
    """Cover an expanded community with learnable sub-communities.

    Repeatedly picks an unvisited member uniformly at random; the seed set is
    the start node plus its neighbors within the expanded community, and the
    sub-community adds the seed set's blanket (restricted to the expanded
    community). Oversized samples are trimmed by removing the start node's
    weakest-edge neighbors (ties broken by gene id); only retained seed
    members count as visited, so every member ends up in some sample.
    """
    if max_learn_size < 3:
        raise ConfigError("max_learn_size must be >= 3")
    if rng is None:
        rng = np.random.default_rng(seed)
    seed_tag = seed if seed is not None else -1

    cid = expanded.base.id
    members = expanded.members
    if len(members) <= max_learn_size:
        return [SubCommunity(seed_set=members, members=members, provenance=(cid, 0, seed_tag))]

    adj = graph.adjacency()
    unvisited = sorted(members)
    samples = []
    sample_idx = 0
    while unvisited:
        start = unvisited[int(rng.integers(len(unvisited)))]
        seed_set = {start} | (set(adj[start]) & members)
        sub = _with_blanket(graph, seed_set, members)
        while len(sub) > max_learn_size and len(seed_set) > 1:
            removable = min(
                (y for y in seed_set if y != start),
                key=lambda y: (adj[start].get(y, 0.0), y),
            )
            seed_set.remove(removable)
            sub = _with_blanket(graph, seed_set, members)
        if len(sub) > max_learn_size:
            # lone start node with a huge blanket: keep its strongest members
            blanket = sorted(sub - seed_set, key=lambda y: (-adj[start].get(y, 0.0), y))
            sub = set(seed_set) | set(blanket[: max_learn_size - len(seed_set)])
        samples.append(
            SubCommunity(
                seed_set=frozenset(seed_set),
                members=frozenset(sub),
                provenance=(cid, sample_idx, seed_tag),
            )
        )
        sample_idx += 1
        visited = seed_set
        unvisited = [g for g in unvisited if g not in visited]
    return samples


def _with_blanket(graph, seed_set, universe):
    blanket = mb_of_set(graph, seed_set).members & universe
    return set(seed_set) | blanket


def dump_subcommunities(samples, path):
    """TSV dump: community_id, sample_idx, comma-separated members."""
    with open(path, "w") as fh:
        for s in samples:
            fh.write(f"{s.provenance[0]}\t{s.provenance[1]}\t{','.join(sorted(s.members))}\n")
