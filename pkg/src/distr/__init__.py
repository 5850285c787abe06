"""Joint dimensionality reduction and clustering with semi-relaxed Gromov-Wasserstein.

A dataset of N points is summarized by n < N prototypes in a low-dimensional
space. A coupling ``T`` matches input samples to prototypes so that the
similarity graph of the prototypes reproduces the input similarity graph.
"""

__version__ = "0.1.0"

from .affinity import (
    SimilarityGraph, entropic_affinity, gram_similarity, input_similarity, linear_gram, mds_gram,
    student_kernel, student_similarity,
)
from .clustering import Partition, lloyd_kmeans, membership_matrix, spectral_clustering
from .datasets import Dataset, blobs, circle3d, generate_synthetic
from .engine import DistrConfig, DistrResult, EmbeddingState, distr_fit, kernel_vjp, prune_report, z_step
from .errors import (
    ConfigurationError, ContractViolation, ConvergenceError, DegenerateGraphError, DistrError,
    DomainError, InfeasibleError, ParameterError,
)
from .loss import KL, L2, DecomposableLoss, get_loss, gw_objective_bruteforce, loss_eval
from .metrics import (
    LabeledEvaluation, combined_score, evaluate, homogeneity, prototype_labels, weighted_silhouette,
)
from .numkit import EigDecomposition, pairwise_sqdist, sinkhorn_normalize, sym_eig
from .pipelines import cluster_then_dr, dr_then_cluster
from .srgw import (
    SolverReport, SrgwProblem, barycenter_step, cg_solve, exact_line_search, gradient_reduced,
    linear_oracle, md_solve, objective_constant, objective_reduced, solve, srgw_barycenter,
    srgw_divergence,
)
