"""Transductive Mahalanobis-distance few-shot classification on embeddings.

A library for few-shot episodes over precomputed feature vectors:
shrinkage-regularized class-covariance estimation, Mahalanobis softmax
and GMM assignment rules, iterative transductive refinement that folds
unlabelled query examples into the estimates, episodic task sampling,
and a paired-seed evaluation/ablation harness.
"""

from .classification import (
    GMM,
    MAHALANOBIS_SOFTMAX,
    AssignmentRule,
    argmax_labels,
    bregman_divergence,
    classify,
    classify_many,
)
from .data import (
    EmbeddingDataset,
    LabeledEmbedding,
    SyntheticSpec,
    Task,
    generate_synthetic,
    load_dataset,
    write_dataset,
)
from .errors import (
    DegenerateClass,
    DimensionMismatch,
    EmptyClass,
    EmptyInput,
    EmptyQuery,
    FactorizationFailed,
    InsufficientClasses,
    InsufficientExamples,
    InvalidSpec,
    MahashotError,
    NonFiniteInput,
    NotSymmetric,
    ParseError,
)
from .estimation import (
    ClassParams,
    Responsibilities,
    TaskEmbedding,
    TaskStats,
    estimate_unweighted,
    estimate_weighted,
    pool_task_embedding,
)
from .harness import (
    AblationGrid,
    AblationSpec,
    EvalReport,
    GridCell,
    emit_report,
    evaluate,
    render_report,
    run_ablation,
)
from .numerics import (
    DEFAULT_JITTER,
    SpdFactor,
    mahalanobis_sq,
    mahalanobis_sq_many,
    solve_spd,
    spd_factorize,
    stable_softmax,
)
from .refinement import RefineConfig, RefineTrace, classify_task, refine
from .sampler import (
    EpisodeStream,
    FixedSamplerConfig,
    VariableSamplerConfig,
    episode_rng,
    sample_fixed,
    sample_task,
    sample_variable,
)

__version__ = "0.1.0"

__all__ = [
    "AssignmentRule",
    "AblationGrid",
    "AblationSpec",
    "ClassParams",
    "DEFAULT_JITTER",
    "DegenerateClass",
    "DimensionMismatch",
    "EmbeddingDataset",
    "EmptyClass",
    "EmptyInput",
    "EmptyQuery",
    "EpisodeStream",
    "EvalReport",
    "FactorizationFailed",
    "FixedSamplerConfig",
    "GMM",
    "GridCell",
    "InsufficientClasses",
    "InsufficientExamples",
    "InvalidSpec",
    "LabeledEmbedding",
    "MAHALANOBIS_SOFTMAX",
    "MahashotError",
    "NonFiniteInput",
    "NotSymmetric",
    "ParseError",
    "RefineConfig",
    "RefineTrace",
    "Responsibilities",
    "SpdFactor",
    "SyntheticSpec",
    "Task",
    "TaskEmbedding",
    "TaskStats",
    "VariableSamplerConfig",
    "argmax_labels",
    "bregman_divergence",
    "classify",
    "classify_many",
    "classify_task",
    "emit_report",
    "episode_rng",
    "estimate_unweighted",
    "estimate_weighted",
    "evaluate",
    "generate_synthetic",
    "load_dataset",
    "mahalanobis_sq",
    "mahalanobis_sq_many",
    "pool_task_embedding",
    "refine",
    "render_report",
    "run_ablation",
    "sample_fixed",
    "sample_task",
    "sample_variable",
    "solve_spd",
    "spd_factorize",
    "stable_softmax",
    "write_dataset",
]
