"""Local-to-global logical explanations for black-box classifiers over
concept vocabularies: minimal sufficient concept sets per instance, per-class
monotone-DNF covering explanations, and multi-class explanation lists."""

__version__ = "0.1.0"

from .core import (
    ClassLabels,
    CompleteExplanation,
    ConceptSet,
    CoveringExplanation,
    ExplanationList,
    ExplanationRule,
    Instance,
    MdnfClause,
    Mscx,
    Vocabulary,
    canonicalize,
    is_subset,
)
from .globalexp import (
    build_coverage_map,
    build_mask_index,
    classify_with_list,
    eval_dnf_coverage,
    exact_min_cover,
    explanation_list,
    format_formula,
    greedy_cover,
    list_accuracy,
)
from .metrics import (
    FidelityReport,
    aggregate_fidelity,
    fidelity_minus,
    fidelity_plus,
    mscx_size_histogram,
)
from .oracle import (
    CachedOracle,
    Oracle,
    OracleStats,
    ScoreQuery,
    SyntheticModel,
    SyntheticOracle,
    TableOracle,
    cached,
    external_oracle,
    load_table_oracle,
    synthetic_predict,
)
from .search import (
    BeamStats,
    SearchConfig,
    beam_add,
    beam_add_with_stats,
    exact_complete_explanation,
    is_sufficient,
    minimize_set,
)
from .synth import GenerateConfig, PlantedConfig, generate, planted_list_dataset

__all__ = [
    "ClassLabels",
    "CompleteExplanation",
    "ConceptSet",
    "CoveringExplanation",
    "ExplanationList",
    "ExplanationRule",
    "Instance",
    "MdnfClause",
    "Mscx",
    "Vocabulary",
    "canonicalize",
    "is_subset",
    "build_coverage_map",
    "build_mask_index",
    "classify_with_list",
    "eval_dnf_coverage",
    "exact_min_cover",
    "explanation_list",
    "format_formula",
    "greedy_cover",
    "list_accuracy",
    "FidelityReport",
    "aggregate_fidelity",
    "fidelity_minus",
    "fidelity_plus",
    "mscx_size_histogram",
    "CachedOracle",
    "Oracle",
    "OracleStats",
    "ScoreQuery",
    "SyntheticModel",
    "SyntheticOracle",
    "TableOracle",
    "cached",
    "external_oracle",
    "load_table_oracle",
    "synthetic_predict",
    "BeamStats",
    "SearchConfig",
    "beam_add",
    "beam_add_with_stats",
    "exact_complete_explanation",
    "is_sufficient",
    "minimize_set",
    "GenerateConfig",
    "PlantedConfig",
    "generate",
    "planted_list_dataset",
]
