"""Directed acyclic graphs over gene ids."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InputError


@dataclass(frozen=True, init=False)
class Dag:
    nodes: tuple  # sorted gene ids
    edges: frozenset  # (parent, child) pairs

    def __init__(self, nodes, edges=()):
        object.__setattr__(self, "nodes", tuple(sorted(set(nodes))))
        object.__setattr__(self, "edges", frozenset(edges))
        node_set = set(self.nodes)
        for u, v in self.edges:
            if u == v:
                raise InputError(f"self-loop on {u!r}")
            if u not in node_set or v not in node_set:
                raise InputError(f"edge ({u!r}, {v!r}) references unknown node")
        if topological_sort(self.nodes, self.edges) is None:
            raise InputError("graph contains a directed cycle")

    @property
    def n_edges(self):
        return len(self.edges)

    def parents(self, v):
        return {u for u, w in self.edges if w == v}

    def parent_map(self):
        pm = {n: set() for n in self.nodes}
        for u, v in self.edges:
            pm[v].add(u)
        return pm

    def skeleton(self):
        """Undirected edge set as frozenset of sorted pairs."""
        return frozenset(tuple(sorted(e)) for e in self.edges)

    def sorted_edges(self):
        return sorted(self.edges)

    def topological_order(self):
        order = topological_sort(self.nodes, self.edges)
        assert order is not None
        return order


def topological_sort(nodes, edges):
    """Kahn's algorithm; returns None if the edge set has a cycle.

    Deterministic: among ready nodes the smallest id goes first.
    """
    import heapq

    indeg = {n: 0 for n in nodes}
    children = {n: [] for n in nodes}
    for u, v in edges:
        indeg[v] += 1
        children[u].append(v)
    ready = [n for n in sorted(nodes) if indeg[n] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    return order if len(order) == len(nodes) else None


def find_cycle(nodes, edges):
    """One directed cycle as a list of edges, or None. Deterministic DFS."""
    children = {n: [] for n in nodes}
    for u, v in sorted(edges):
        children[u].append(v)

    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}
    stack_pos = {}

    for root in sorted(nodes):
        if color[root] != WHITE:
            continue
        path = []
        stack = [(root, iter(children[root]))]
        color[root] = GREY
        stack_pos[root] = 0
        while stack:
            node, it = stack[-1]
            advanced = False
            for child in it:
                if color[child] == GREY:
                    start = stack_pos[child]
                    cycle_nodes = [frame[0] for frame in stack[start:]] + [child]
                    return [
                        (cycle_nodes[i], cycle_nodes[i + 1])
                        for i in range(len(cycle_nodes) - 1)
                    ]
                if color[child] == WHITE:
                    color[child] = GREY
                    stack_pos[child] = len(stack)
                    stack.append((child, iter(children[child])))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack_pos.pop(node, None)
                stack.pop()
    return None


def dump_dag(dag, path, score=None):
    """Edge-list TSV; node universe and optional score in comment headers."""
    with open(path, "w") as fh:
        fh.write(f"# nodes: {','.join(dag.nodes)}\n")
        if score is not None:
            fh.write(f"# score: {score:.12g}\n")
        for u, v in dag.sorted_edges():
            fh.write(f"{u}\t{v}\n")


def load_dag(path):
    nodes = set()
    edges = set()
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# nodes:"):
                    listed = line.split(":", 1)[1].strip()
                    if listed:
                        nodes.update(listed.split(","))
                continue
            parts = line.split("\t")
            u, v = parts[0], parts[1]
            nodes.update((u, v))
            edges.add((u, v))
    return Dag(nodes, edges)
