"""Differentially private (k, p)-clustering with per-agent contrastive explanations."""

from .core import (
    CenterSet,
    ClusteringParams,
    Dataset,
    WeightedPointSet,
    brute_force_opt,
    cost_p,
    exact_partition_opt,
    normalize_to_unit_ball,
)
from .kmeans import candidate_centers, kmeans, kmeans_fixed_center
from .kmedian import kmedian, kmedian_fixed_center, solve_kmedian
from .pipeline import (
    ExplanationRecord,
    PipelineConfig,
    PrivateClusteringResult,
    check_valid_explanation,
    private_clustering,
    private_explanations,
)
from .privacy import PrivacyBudget

__version__ = "0.1.0"

__all__ = [
    "CenterSet",
    "ClusteringParams",
    "Dataset",
    "ExplanationRecord",
    "PipelineConfig",
    "PrivacyBudget",
    "PrivateClusteringResult",
    "WeightedPointSet",
    "brute_force_opt",
    "candidate_centers",
    "check_valid_explanation",
    "cost_p",
    "exact_partition_opt",
    "kmeans",
    "kmeans_fixed_center",
    "kmedian",
    "kmedian_fixed_center",
    "normalize_to_unit_ball",
    "private_clustering",
    "private_explanations",
    "solve_kmedian",
]
