"""grn-forge: divide-and-conquer gene regulatory network reconstruction.

The pipeline builds an absolute-Pearson co-expression network, partitions it
into overlapping link communities, expands each community with Markov-blanket
candidates, samples learnable sub-communities, fits linear-Gaussian Bayesian
networks by hill climbing, repairs conflicts, and greedily merges everything
into one global DAG.
"""

from .benchmark import GroundTruthModel, RecoveryMetrics, evaluate, generate_dag, random_model, sample_expression
from .communities import Community, CommunityPartition, LinkDendrogram, cluster_links, cut_by_partition_density, edge_similarity, partition_recursive
from .conflicts import ConflictReport, Triplet, enforce_acyclicity, find_candidate_triplets, integrate, relearn_conflicts, resolve
from .expression import ExpressionMatrix, WeightedGeneNetwork, build_correlation_network, default_threshold, load_expression, pearson_abs, prune
from .learning import dag_score, exhaustive_best, hill_climb, node_bic
from .merging import MergeNode, jaccard, merge_all
from .pipeline import PipelineConfig, load_config, run_pipeline, stable_seed
from .sampling import ExpandedCommunity, MarkovBlanketSet, SubCommunity, expand, mb_candidates_node, mb_of_set, rnn_sample
from .structure import Dag, topological_sort

__version__ = "0.1.0"
