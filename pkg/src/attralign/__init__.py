"""Credit-risk baselines, model-grounded attributions, and LLM ranking-fidelity evaluation."""

__version__ = "0.1.0"

from .alignment import AlignmentScore, kendall_tau_topk, overlap_at_k, score_rankings, summarize
from .attribution import (
    AttributionVector,
    RankedExplanation,
    brute_force_shapley,
    group_attributions,
    linear_contributions,
    rank_features,
    tree_shap,
)
from .data import (
    EncodedDataset,
    SplitIndices,
    apply_schema,
    drop_degenerate,
    impute_missing,
    load_table,
    prepare,
    stratified_split,
)
from .schema import FeatureSchema, load_schema

__all__ = [
    "__version__",
    "AlignmentScore",
    "kendall_tau_topk",
    "overlap_at_k",
    "score_rankings",
    "summarize",
    "AttributionVector",
    "RankedExplanation",
    "brute_force_shapley",
    "group_attributions",
    "linear_contributions",
    "rank_features",
    "tree_shap",
    "EncodedDataset",
    "SplitIndices",
    "apply_schema",
    "drop_degenerate",
    "impute_missing",
    "load_table",
    "prepare",
    "stratified_split",
    "FeatureSchema",
    "load_schema",
]
