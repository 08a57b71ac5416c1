"""Diversified multiple trees: attribute-disjoint C4.5 ensembles and a
noise-robustness benchmark harness."""

__version__ = "0.1.0"

from dmtree.dataset import (
    AttributeSchema,
    Dataset,
    DatasetError,
    NormalizationStats,
    align_datasets,
    apply_normalization,
    load_dataset,
    znormalize,
)
from dmtree.tree import (
    DecisionTree,
    SplitTest,
    TreeParams,
    best_split,
    build_tree,
    classify,
    entropy,
    gain_ratio,
    used_attributes,
)
from dmtree.voting import VoteBreakdown
from dmtree.dmt import (
    DmtModel,
    build_dmt,
    classify_dmt,
    laplace_weight,
    support_weight,
    tree_sizes,
)
from dmtree.baselines import (
    EnsembleModel,
    RandomSplitParams,
    build_adaboost,
    build_bagging,
    build_random_forest,
    build_random_tree_ensemble,
    classify_ensemble,
)
from dmtree.stats import PairedAccuracies, WilcoxonResult, wilcoxon_signed_rank

__all__ = [
    "AttributeSchema",
    "Dataset",
    "DatasetError",
    "DecisionTree",
    "DmtModel",
    "EnsembleModel",
    "NormalizationStats",
    "PairedAccuracies",
    "RandomSplitParams",
    "SplitTest",
    "TreeParams",
    "VoteBreakdown",
    "WilcoxonResult",
    "align_datasets",
    "apply_normalization",
    "best_split",
    "build_adaboost",
    "build_bagging",
    "build_dmt",
    "build_random_forest",
    "build_random_tree_ensemble",
    "build_tree",
    "classify",
    "classify_dmt",
    "classify_ensemble",
    "entropy",
    "gain_ratio",
    "laplace_weight",
    "load_dataset",
    "support_weight",
    "tree_sizes",
    "used_attributes",
    "wilcoxon_signed_rank",
    "znormalize",
]
