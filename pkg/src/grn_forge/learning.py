"""Score-based structure learning of linear-Gaussian Bayesian networks.

Each node is modeled as a linear regression on its parents with Gaussian
noise; the decomposable BIC score (maximized log-likelihood minus
(|parents| + 2)/2 * ln n) is optimized by greedy hill climbing with random
restarts over add/delete/reverse single-edge moves. An exhaustive enumerator
over <= 5 nodes serves as the test oracle.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import CollinearParents, ConfigError, InputError
from .structure import Dag, topological_sort

VARIANCE_FLOOR = 1e-12
IMPROVE_EPS = 1e-9
DEFAULT_RESTARTS = 5
DEFAULT_MAX_PARENTS = 4


class _Scorer:
    """Node-score cache over a fixed data slice.

    The intercept is handled by centering each row once; the residual sum of
    squares of any child-on-parents regression then comes from the scatter
    matrix S = Yc Yc^T via rss = S_vv - S_vp S_pp^{-1} S_pv, so a score costs
    a p x p solve instead of an n-row least-squares fit.
    """

    def __init__(self, data, nodes):
        self.nodes = tuple(sorted(nodes))
        missing = set(self.nodes) - set(data.gene_ids)
        if missing:
            raise InputError(f"nodes not in data: {sorted(missing)}")
        self.index = {g: i for i, g in enumerate(self.nodes)}
        Y = data.values[[data.index(g) for g in self.nodes]].astype(np.float64)
        Yc = Y - Y.mean(axis=1, keepdims=True)
        self.n = Y.shape[1]
        self.k = len(self.nodes)
        self.S = Yc @ Yc.T
        self._cache = {}

    def _rss(self, v, pa):
        if not pa:
            return float(self.S[v, v])
        Spp = self.S[np.ix_(pa, pa)]
        Spv = self.S[pa, v]
        try:
            coef = np.linalg.solve(Spp, Spv)
        except np.linalg.LinAlgError:
            return None
        # reject near-singular parent scatter (collinear parents)
        if not np.all(np.isfinite(coef)):
            return None
        cond_guard = np.abs(Spp @ coef - Spv).max()
        scale = max(np.abs(Spv).max(), 1.0)
        if cond_guard > 1e-6 * scale:
            return None
        rss = float(self.S[v, v] - Spv @ coef)
        if rss < -1e-6 * max(self.S[v, v], 1.0):
            return None
        return max(rss, 0.0)

    def score(self, v, parent_idx):
        """Score of node index ``v`` given a parent index set; None if invalid."""
        key = (v, frozenset(parent_idx))
        if key not in self._cache:
            pa = sorted(parent_idx)
            if self.n <= len(pa) + 2:
                self._cache[key] = None
            else:
                rss = self._rss(v, pa)
                if rss is None:
                    self._cache[key] = None
                else:
                    sigma2 = max(rss / self.n, VARIANCE_FLOOR)
                    loglik = -0.5 * self.n * (math.log(2.0 * math.pi * sigma2) + 1.0)
                    self._cache[key] = loglik - 0.5 * (len(pa) + 2) * math.log(self.n)
        return self._cache[key]


def node_bic(data, child, parents):
    """Public per-node BIC score over gene ids; raises CollinearParents when
    the parent design matrix is rank-deficient."""
    parents = sorted(set(parents))
    if child in parents:
        raise InputError("child cannot be its own parent")
    sc = _Scorer(data, [child] + parents)
    v = sc.index[child]
    s = sc.score(v, [sc.index[p] for p in parents])
    if s is None:
        raise CollinearParents(f"invalid regression for {child!r} <- {parents}")
    return s


def dag_score(dag, data):
    """Decomposable score: sum of node scores."""
    pm = dag.parent_map()
    return sum(node_bic(data, v, pm[v]) for v in dag.nodes)


def _closure(adj):
    """Boolean reachability matrix (strict: R[i, j] = path i -> j of length >= 1)."""
    R = adj.astype(np.float32)
    while True:
        N = ((R + R @ R) > 0).astype(np.float32)
        if np.array_equal(N, R):
            return N.astype(bool)
        R = N


def _greedy_climb(scorer, parents, max_parents):
    """Hill-climb from the given parent map (list of sets of indices)."""
    k, n = scorer.k, scorer.n

    # drop parents that make a node's regression invalid (rare; random starts)
    for v in range(k):
        while parents[v] and scorer.score(v, parents[v]) is None:
            parents[v].discard(max(parents[v]))

    base = np.array([scorer.score(v, parents[v]) for v in range(k)], dtype=np.float64)
    adj = np.zeros((k, k), dtype=bool)
    for v in range(k):
        for u in parents[v]:
            adj[u, v] = True
    reach = _closure(adj)

    add_cache = {}  # v -> (frozenset(parents), np.array of s(v, pa + {u}))

    def add_scores(v):
        pa = frozenset(parents[v])
        hit = add_cache.get(v)
        if hit is not None and hit[0] == pa:
            return hit[1]
        arr = np.full(k, -np.inf)
        for u in range(k):
            if u == v or u in pa:
                continue
            s = scorer.score(v, pa | {u})
            if s is not None:
                arr[u] = s
        add_cache[v] = (pa, arr)
        return arr

    while True:
        best = None  # (delta, type_rank, u, v)

        # adds: u -> v
        for v in range(k):
            if len(parents[v]) >= max_parents or base[v] == -np.inf:
                continue
            arr = add_scores(v)
            deltas = arr - base[v]
            # cycle guard: v must not reach u; skip existing parents/self
            valid = ~reach[v, :].copy()
            valid[v] = False
            for u in parents[v]:
                valid[u] = False
            deltas = np.where(valid, deltas, -np.inf)
            u = int(np.argmax(deltas))
            d = deltas[u]
            if d > IMPROVE_EPS:
                cand = (d, 0, u, v)
                if best is None or _move_better(cand, best):
                    best = cand

        # deletes and reverses over existing edges
        for v in range(k):
            for u in sorted(parents[v]):
                s_del = scorer.score(v, parents[v] - {u})
                if s_del is None:
                    continue
                d_del = s_del - base[v]
                if d_del > IMPROVE_EPS:
                    cand = (d_del, 1, u, v)
                    if best is None or _move_better(cand, best):
                        best = cand
                # reverse u->v to v->u
                if len(parents[u]) < max_parents:
                    children_u = np.flatnonzero(adj[u, :])
                    alt_path = any(w != v and reach[w, v] for w in children_u)
                    if not alt_path:
                        s_add = add_scores(u)[v]
                        if s_add != -np.inf:
                            d_rev = (s_del - base[v]) + (s_add - base[u])
                            if d_rev > IMPROVE_EPS:
                                cand = (d_rev, 2, u, v)
                                if best is None or _move_better(cand, best):
                                    best = cand

        if best is None:
            break
        _d, kind, u, v = best
        if kind == 0:
            parents[v].add(u)
            adj[u, v] = True
            touched = (v,)
        elif kind == 1:
            parents[v].discard(u)
            adj[u, v] = False
            touched = (v,)
        else:
            parents[v].discard(u)
            parents[u].add(v)
            adj[u, v] = False
            adj[v, u] = True
            touched = (u, v)
        for t in touched:
            base[t] = scorer.score(t, parents[t])
            add_cache.pop(t, None)
        reach = _closure(adj)

    return parents, float(base.sum())


def _move_better(cand, best):
    # higher delta wins; exact ties fall to (move type, endpoints) order
    if cand[0] != best[0]:
        return cand[0] > best[0]
    return (cand[1], cand[2], cand[3]) < (best[1], best[2], best[3])


def hill_climb(
    data,
    nodes,
    rng=None,
    restarts=DEFAULT_RESTARTS,
    max_parents=DEFAULT_MAX_PARENTS,
    seed=None,
):
    """Greedy structure search with random restarts.

    Restart 0 always starts from the empty graph; later restarts start from a
    random DAG built on a random topological order with edge probability
    min(0.5, 2/k). Returns the best-scoring DAG found; ties resolved by the
    lexicographically smallest edge set.
    """
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")
    if max_parents < 1:
        raise ConfigError("max_parents must be >= 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    scorer = _Scorer(data, nodes)
    k = scorer.k
    if k == 0:
        raise InputError("hill_climb needs at least one node")

    best_edges, best_score = None, -np.inf
    for r in range(restarts):
        if r == 0:
            parents = [set() for _ in range(k)]
        else:
            order = [int(x) for x in rng.permutation(k)]
            p_edge = min(0.5, 2.0 / k) if k > 1 else 0.0
            parents = [set() for _ in range(k)]
            for i in range(k):
                for j in range(i + 1, k):
                    u, v = order[i], order[j]
                    if len(parents[v]) < max_parents and rng.random() < p_edge:
                        parents[v].add(u)
        parents, score = _greedy_climb(scorer, parents, max_parents)
        edges = sorted(
            (scorer.nodes[u], scorer.nodes[v])
            for v in range(k)
            for u in parents[v]
        )
        if best_edges is None or score > best_score + IMPROVE_EPS:
            best_edges, best_score = tuple(edges), score
        elif abs(score - best_score) <= IMPROVE_EPS and tuple(edges) < best_edges:
            best_edges = tuple(edges)
    return Dag(scorer.nodes, best_edges)


def exhaustive_best(data, nodes):
    """Enumerate every DAG over <= 5 nodes and return the score maximizer.

    Ties are broken by the lexicographically smallest sorted edge-set
    encoding.
    """
    nodes = tuple(sorted(set(nodes)))
    if len(nodes) > 5:
        raise ConfigError("exhaustive search is limited to 5 nodes")
    scorer = _Scorer(data, nodes)
    k = scorer.k
    idx_pairs = list(itertools.combinations(range(k), 2))

    best_edges, best_score = None, -np.inf
    for states in itertools.product((0, 1, 2), repeat=len(idx_pairs)):
        edges = []
        for (i, j), s in zip(idx_pairs, states):
            if s == 1:
                edges.append((i, j))
            elif s == 2:
                edges.append((j, i))
        if topological_sort(range(k), edges) is None:
            continue
        parent_sets = [frozenset() for _ in range(k)]
        for u, v in edges:
            parent_sets[v] = parent_sets[v] | {u}
        score = 0.0
        ok = True
        for v in range(k):
            s = scorer.score(v, parent_sets[v])
            if s is None:
                ok = False
                break
            score += s
        if not ok:
            continue
        named = tuple(sorted((nodes[u], nodes[v]) for u, v in edges))
        if best_edges is None or score > best_score + 1e-12:
            best_edges, best_score = named, score
        elif abs(score - best_score) <= 1e-12 and named < best_edges:
            best_edges = named
    return Dag(nodes, best_edges)
