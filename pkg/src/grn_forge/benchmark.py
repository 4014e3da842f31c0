"""Synthetic linear-Gaussian ground truth and structure-recovery metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, UniverseMismatch
from .expression import ExpressionMatrix
from .structure import Dag


@dataclass(frozen=True)
class GroundTruthModel:
    dag: Dag
    coefficients: dict  # (parent, child) -> float
    noise_sd: dict  # node -> float > 0
    intercepts: dict  # node -> float

    def __post_init__(self):
        if set(self.coefficients) != set(self.dag.edges):
            raise InputError("coefficients must cover exactly the DAG edges")
        if any(sd <= 0 for sd in self.noise_sd.values()):
            raise InputError("noise standard deviations must be positive")


@dataclass(frozen=True)
class RecoveryMetrics:
    skeleton_precision: float
    skeleton_recall: float
    skeleton_f1: float
    oriented_precision: float
    oriented_recall: float
    shd: int

    def to_dict(self):
        return {
            "skeleton_precision": self.skeleton_precision,
            "skeleton_recall": self.skeleton_recall,
            "skeleton_f1": self.skeleton_f1,
            "oriented_precision": self.oriented_precision,
            "oriented_recall": self.oriented_recall,
            "shd": self.shd,
        }


def generate_dag(n, avg_degree, rng=None, seed=None, prefix="G"):
    """Random DAG: random topological order, forward edges with probability
    avg_degree / (n - 1)."""
    if n < 1:
        raise InputError("n must be >= 1")
    if avg_degree < 0:
        raise InputError("avg_degree must be >= 0")
    if rng is None:
        rng = np.random.default_rng(seed)
    width = max(3, len(str(n - 1)))
    names = [f"{prefix}{i:0{width}d}" for i in range(n)]
    order = [names[int(i)] for i in rng.permutation(n)]
    p = 0.0 if n == 1 else min(1.0, avg_degree / (n - 1))
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((order[i], order[j]))
    return Dag(names, edges)


def random_model(dag, rng=None, seed=None, coef_range=(0.5, 1.5), noise_sd=1.0):
    """Coefficients drawn uniformly from +-[coef_range]; unit noise, zero
    intercepts by default."""
    if rng is None:
        rng = np.random.default_rng(seed)
    lo, hi = coef_range
    coeffs = {}
    for e in dag.sorted_edges():
        mag = float(rng.uniform(lo, hi))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        coeffs[e] = sign * mag
    return GroundTruthModel(
        dag=dag,
        coefficients=coeffs,
        noise_sd={v: float(noise_sd) for v in dag.nodes},
        intercepts={v: 0.0 for v in dag.nodes},
    )


def sample_expression(model, n_samples, rng=None, seed=None):
    """Ancestral sampling of the linear SEM in topological order."""
    if n_samples < 3:
        raise InputError("n_samples must be >= 3")
    if rng is None:
        rng = np.random.default_rng(seed)
    nodes = model.dag.nodes
    idx = {g: i for i, g in enumerate(nodes)}
    pm = model.dag.parent_map()
    values = np.zeros((len(nodes), n_samples))
    for v in model.dag.topological_order():
        x = model.intercepts[v] + rng.normal(0.0, model.noise_sd[v], size=n_samples)
        for u in sorted(pm[v]):
            x = x + model.coefficients[(u, v)] * values[idx[u]]
        values[idx[v]] = x
    return ExpressionMatrix(tuple(nodes), values)


def evaluate(predicted, truth):
    """Skeleton and orientation recovery metrics plus SHD.

    SHD counts each missing or extra skeleton edge once and each common but
    wrongly oriented edge once.
    """
    if set(predicted.nodes) != set(truth.nodes):
        raise UniverseMismatch(
            f"{len(predicted.nodes)} predicted vs {len(truth.nodes)} true nodes"
        )
    pred_skel, true_skel = predicted.skeleton(), truth.skeleton()
    tp = len(pred_skel & true_skel)
    sp = tp / len(pred_skel) if pred_skel else (1.0 if not true_skel else 0.0)
    sr = tp / len(true_skel) if true_skel else (1.0 if not pred_skel else 0.0)
    f1 = 0.0 if sp + sr == 0 else 2 * sp * sr / (sp + sr)

    otp = len(predicted.edges & truth.edges)
    op = otp / len(predicted.edges) if predicted.edges else (1.0 if not truth.edges else 0.0)
    orc = otp / len(truth.edges) if truth.edges else (1.0 if not predicted.edges else 0.0)

    wrong_orient = sum(
        1
        for e in pred_skel & true_skel
        if not _same_direction(e, predicted.edges, truth.edges)
    )
    shd = len(pred_skel ^ true_skel) + wrong_orient
    return RecoveryMetrics(
        skeleton_precision=sp,
        skeleton_recall=sr,
        skeleton_f1=f1,
        oriented_precision=op,
        oriented_recall=orc,
        shd=shd,
    )


def _same_direction(skel_edge, pred_edges, true_edges):
    a, b = skel_edge
    pred_dir = (a, b) in pred_edges
    true_dir = (a, b) in true_edges
    return pred_dir == true_dir


def dump_ground_truth(model, path):
    """Edge-list TSV with coefficients; node universe in a comment header."""
    with open(path, "w") as fh:
        fh.write(f"# nodes: {','.join(model.dag.nodes)}\n")
        for u, v in model.dag.sorted_edges():
            fh.write(f"{u}\t{v}\t{model.coefficients[(u, v)]:.12g}\n")
