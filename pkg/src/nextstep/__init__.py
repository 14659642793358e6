"""Next-step concept prediction for academic and career trajectories.

The pipeline: ingest resume-like profiles into trajectories of classified
steps, count how concepts co-occur with a chosen context, rank hypotheses
by those counts, and evaluate with leave-one-out over every predictable
step. A synthetic generator stands in for real profile data, and an HTTP
service plus a CLI expose the whole thing.
"""

from .core import (
    MAX_CONCEPTS_PER_STEP,
    ConceptId,
    NextStepError,
    Skill,
    Step,
    StepDate,
    StepKind,
    Taxonomy,
    TaxonomyError,
    Trajectory,
    canonical_taxonomies,
    classify_step,
    load_taxonomies,
    load_taxonomy,
    save_taxonomy,
)
from .evaluator import (
    EvalReport,
    ReorientationFlag,
    ScoreParams,
    confidence_interval,
    detect_reorientations,
    evaluate,
    histogram_csv,
    rank_of_truth,
    report_table,
    step_score,
)
from .ingest import (
    MIN_STEPS_PER_PROFILE,
    AliasTable,
    CorpusStats,
    ParseError,
    corpus_stats,
    load_aliases,
    load_corpus,
    normalize_key,
    normalize_title,
    write_corpus,
)
from .predictor import (
    FrequencyModel,
    Hypothesis,
    Method,
    RankedPrediction,
    extract_context,
    leave_one_out_rank,
    predictable_indices,
    rank,
    train,
)
from .synthgen import GenParams, generate, synthetic_taxonomy

__version__ = "0.1.0"

__all__ = [
    "AliasTable",
    "ConceptId",
    "CorpusStats",
    "EvalReport",
    "FrequencyModel",
    "GenParams",
    "Hypothesis",
    "MAX_CONCEPTS_PER_STEP",
    "MIN_STEPS_PER_PROFILE",
    "Method",
    "NextStepError",
    "ParseError",
    "RankedPrediction",
    "ReorientationFlag",
    "ScoreParams",
    "Skill",
    "Step",
    "StepDate",
    "StepKind",
    "Taxonomy",
    "TaxonomyError",
    "Trajectory",
    "canonical_taxonomies",
    "classify_step",
    "confidence_interval",
    "corpus_stats",
    "detect_reorientations",
    "evaluate",
    "extract_context",
    "generate",
    "histogram_csv",
    "leave_one_out_rank",
    "load_aliases",
    "load_corpus",
    "load_taxonomies",
    "load_taxonomy",
    "normalize_key",
    "normalize_title",
    "predictable_indices",
    "rank",
    "rank_of_truth",
    "report_table",
    "save_taxonomy",
    "step_score",
    "synthetic_taxonomy",
    "train",
    "write_corpus",
]
