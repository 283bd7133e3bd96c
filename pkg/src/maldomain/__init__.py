"""Malicious web-domain classification: nine classifiers, BPSO feature selection,
repeated cross-validation and rank-based model comparison."""

from .bpso import BPSOConfig, run_bpso
from .classifiers import ClassifierSpec, Family, fit, predict, predict_score
from .dataset import (
    FEATURE_NAMES,
    Dataset,
    Label,
    generate_synthetic,
    load_csv,
    min_max_scale,
    stratified_k_folds,
)
from .evaluation import confusion, cross_validate, grid_tune, metrics, repeated_cv
from .stats import friedman_ranks, pairwise_comparison_table, wilcoxon_signed_rank

__version__ = "1.0.0"

__all__ = [
    "BPSOConfig",
    "ClassifierSpec",
    "Dataset",
    "FEATURE_NAMES",
    "Family",
    "Label",
    "confusion",
    "cross_validate",
    "fit",
    "friedman_ranks",
    "generate_synthetic",
    "grid_tune",
    "load_csv",
    "metrics",
    "min_max_scale",
    "pairwise_comparison_table",
    "predict",
    "predict_score",
    "repeated_cv",
    "run_bpso",
    "stratified_k_folds",
    "wilcoxon_signed_rank",
]
