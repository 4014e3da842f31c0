"""Expression matrices and the absolute-Pearson co-expression network.

The co-expression network is the entry point of the pipeline: every pair of
genes gets an edge weighted by |Pearson correlation|, then weak edges are
pruned at a truncate threshold (mean + one population standard deviation of
all edge weights by default).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstantGene,
    DegenerateNetwork,
    DuplicateGene,
    InputError,
    MissingValue,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExpressionMatrix:
    """Dense genes x samples matrix of continuous expression values."""

    gene_ids: tuple
    values: np.ndarray  # shape (n_genes, n_samples), float64

    def __post_init__(self):
        if len(self.gene_ids) != len(set(self.gene_ids)):
            seen = set()
            for g in self.gene_ids:
                if g in seen:
                    raise DuplicateGene(g)
                seen.add(g)
        if any(not isinstance(g, str) or not g for g in self.gene_ids):
            raise InputError("gene ids must be non-empty strings")
        if self.values.ndim != 2 or self.values.shape[0] != len(self.gene_ids):
            raise InputError("values must be a 2-D array with one row per gene")
        if self.values.shape[1] < 3:
            raise InputError("need at least 3 samples per gene")
        if not np.all(np.isfinite(self.values)):
            raise InputError("expression values must all be finite")

    @property
    def n_genes(self):
        return len(self.gene_ids)

    @property
    def n_samples(self):
        return self.values.shape[1]

    def index(self, gene_id):
        try:
            return self.gene_ids.index(gene_id)
        except ValueError:
            raise KeyError(gene_id) from None

    def row(self, gene_id):
        return self.values[self.index(gene_id)]

    def subset(self, gene_ids):
        """Slice to the given genes, preserving the requested order."""
        idx = [self.index(g) for g in gene_ids]
        return ExpressionMatrix(tuple(gene_ids), self.values[idx].copy())


def load_expression(path, fmt=None):
    """Load a TSV/CSV expression table (gene id column + numeric samples).

    An optional header row is detected automatically: if every non-id cell in
    the first row fails to parse as a number, the row is treated as a header.
    """
    if fmt is None:
        fmt = "csv" if str(path).lower().endswith(".csv") else "tsv"
    if fmt not in ("tsv", "csv"):
        raise InputError(f"unknown format {fmt!r}")
    delim = "," if fmt == "csv" else "\t"

    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delim) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty file")

    def parse_cell(cell, r, c):
        try:
            v = float(cell)
        except ValueError:
            raise MissingValue(r, c) from None
        if not math.isfinite(v):
            raise MissingValue(r, c)
        return v

    start = 0
    first_numeric = []
    for cell in rows[0][1:]:
        try:
            float(cell)
            first_numeric.append(True)
        except ValueError:
            first_numeric.append(False)
    if first_numeric and not any(first_numeric):
        start = 1  # header row

    gene_ids = []
    data = []
    width = None
    for r in range(start, len(rows)):
        row = rows[r]
        if width is None:
            width = len(row)
            if width < 4:
                raise InputError("need a gene id column plus at least 3 sample columns")
        elif len(row) != width:
            raise InputError(f"ragged row {r}: expected {width} columns, got {len(row)}")
        gid = row[0].strip()
        if not gid:
            raise InputError(f"empty gene id at row {r}")
        if gid in set(gene_ids):
            raise DuplicateGene(gid)
        gene_ids.append(gid)
        data.append([parse_cell(c, r, j + 1) for j, c in enumerate(row[1:])])

    if not gene_ids:
        raise InputError(f"{path}: no data rows")
    return ExpressionMatrix(tuple(gene_ids), np.asarray(data, dtype=np.float64))


def pearson_abs(x, y):
    """Absolute Pearson correlation of two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 3:
        raise InputError("pearson_abs needs two equal-length vectors of size >= 3")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt(np.dot(xc, xc)))
    sy = float(np.sqrt(np.dot(yc, yc)))
    if sx == 0.0 or sy == 0.0:
        raise ConstantGene()
    r = abs(float(np.dot(xc, yc)) / (sx * sy))
    if r > 1.0 + 1e-12:
        raise InputError(f"correlation magnitude {r} outside [0, 1]")
    return min(r, 1.0)


@dataclass
class WeightedGeneNetwork:
    """Undirected weighted graph over genes; weights are |Pearson| in [0, 1]."""

    nodes: tuple
    weights: dict  # (a, b) with a < b -> weight
    threshold: float | None = None
    _adj: dict | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        node_set = set(self.nodes)
        for (a, b), w in self.weights.items():
            if a >= b:
                raise InputError(f"edge key {(a, b)} not in canonical (a < b) order")
            if a not in node_set or b not in node_set:
                raise InputError(f"edge {(a, b)} references unknown node")
            if not (-1e-12 <= w <= 1.0 + 1e-12):
                raise InputError(f"edge weight {w} outside [0, 1]")

    @staticmethod
    def key(a, b):
        return (a, b) if a < b else (b, a)

    @property
    def n_edges(self):
        return len(self.weights)

    def edges(self):
        """Edges in sorted endpoint order."""
        return sorted(self.weights)

    def has_edge(self, a, b):
        return self.key(a, b) in self.weights

    def weight(self, a, b):
        return self.weights[self.key(a, b)]

    def adjacency(self):
        if self._adj is None:
            adj = {n: {} for n in self.nodes}
            for (a, b), w in self.weights.items():
                adj[a][b] = w
                adj[b][a] = w
            self._adj = adj
        return self._adj

    def neighbors(self, x):
        return self.adjacency()[x]

    def degree(self, x):
        return len(self.adjacency()[x])

    def subgraph(self, members):
        """Induced subgraph on the given node set."""
        members = set(members)
        sub = {k: w for k, w in self.weights.items() if k[0] in members and k[1] in members}
        return WeightedGeneNetwork(tuple(sorted(members)), sub, threshold=self.threshold)


def find_constant_genes(m):
    """Gene ids whose expression vector has zero variance."""
    centered = m.values - m.values.mean(axis=1, keepdims=True)
    ss = np.einsum("ij,ij->i", centered, centered)
    return [g for g, s in zip(m.gene_ids, ss) if s == 0.0]


def build_correlation_network(m, on_constant="exclude"):
    """Complete |Pearson| network over all non-constant genes.

    ``on_constant`` is ``"exclude"`` (drop zero-variance genes with a warning)
    or ``"error"`` (raise ConstantGene).
    """
    constant = find_constant_genes(m)
    if constant:
        if on_constant == "error":
            raise ConstantGene(constant[0])
        log.warning("excluding %d constant-expression gene(s): %s", len(constant), constant)
    keep = [g for g in m.gene_ids if g not in set(constant)]
    idx = [m.index(g) for g in keep]
    vals = m.values[idx]

    centered = vals - vals.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", centered, centered))
    z = centered / norms[:, None]
    corr = np.abs(z @ z.T)
    np.clip(corr, 0.0, 1.0, out=corr)

    weights = {}
    for i in range(len(keep)):
        for j in range(i + 1, len(keep)):
            a, b = keep[i], keep[j]
            k = (a, b) if a < b else (b, a)
            weights[k] = float(corr[i, j])
    return WeightedGeneNetwork(tuple(sorted(keep)), weights)


def default_threshold(network):
    """Mean plus one population standard deviation of all edge weights."""
    if network.n_edges < 2:
        raise DegenerateNetwork("need at least 2 edges for mean + std threshold")
    w = np.fromiter(network.weights.values(), dtype=np.float64, count=network.n_edges)
    return float(w.mean() + w.std())


def prune(network, t):
    """Keep edges with weight >= t; all nodes are retained (isolates allowed)."""
    if t < 0:
        raise InputError("threshold must be >= 0")
    kept = {k: w for k, w in network.weights.items() if w >= t}
    return WeightedGeneNetwork(network.nodes, kept, threshold=float(t))


def dump_edges(network, path):
    """Write the edge list as TSV with 12-significant-digit weights."""
    with open(path, "w") as fh:
        for a, b in network.edges():
            fh.write(f"{a}\t{b}\t{network.weight(a, b):.12g}\n")


def load_edges(path):
    """Read an edge-list TSV (gene_a, gene_b, weight) back into a network."""
    weights = {}
    nodes = set()
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise InputError(f"bad edge line: {line!r}")
            a, b, w = parts[0], parts[1], float(parts[2])
            nodes.update((a, b))
            weights[WeightedGeneNetwork.key(a, b)] = w
    return WeightedGeneNetwork(tuple(sorted(nodes)), weights)
