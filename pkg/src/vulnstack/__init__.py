"""Stacked-ensemble pipeline for five-class source-code classification.

Base models score code samples with five-class probability vectors;
their concatenated outputs train meta-classifiers (logistic regression,
random forest, RBF SVM, gradient-boosted trees), and the best one by
validation cross-validation produces the reported test metrics.
"""

from __future__ import annotations

__version__ = "0.1.0"

from . import meta
from .base_models import (
    BUILTIN_KINDS,
    ExternalModel,
    ProbTable,
    SoftmaxModel,
    TrainConfig,
    load_external_probs,
    predict_proba_base,
    prob_table_from_model,
    train_builtin,
    write_prob_table,
)
from .corpus import (
    CLASS_NAMES,
    NUM_CLASSES,
    ClassDistribution,
    CodeSample,
    Corpus,
    SplitSet,
    clean,
    downsample,
    load_corpus,
    split_manifest,
    stratified_split,
    write_corpus_jsonl,
    write_split_manifest,
)
from .errors import (
    CalibrationError,
    ConfigError,
    CorpusError,
    CoverageError,
    DegenerateDataError,
    PipelineError,
    ProbFormatError,
    SplitError,
    VulnstackError,
)
from .metrics import (
    EvalReport,
    auc_ovr,
    classification_metrics,
    confusion_matrix,
    evaluate,
    format_percent,
)
from .stacking import (
    MetaDataset,
    PipelineConfig,
    PipelineResult,
    RunOutput,
    ablation_sweep,
    build_meta_features,
    run_pipeline,
    select_meta,
)

__all__ = [
    "__version__",
    "meta",
    "BUILTIN_KINDS",
    "CLASS_NAMES",
    "NUM_CLASSES",
    "CalibrationError",
    "ClassDistribution",
    "CodeSample",
    "ConfigError",
    "Corpus",
    "CorpusError",
    "CoverageError",
    "DegenerateDataError",
    "EvalReport",
    "ExternalModel",
    "MetaDataset",
    "PipelineConfig",
    "PipelineError",
    "PipelineResult",
    "ProbFormatError",
    "ProbTable",
    "RunOutput",
    "SoftmaxModel",
    "SplitError",
    "SplitSet",
    "TrainConfig",
    "VulnstackError",
    "ablation_sweep",
    "auc_ovr",
    "build_meta_features",
    "classification_metrics",
    "clean",
    "confusion_matrix",
    "downsample",
    "evaluate",
    "format_percent",
    "load_corpus",
    "load_external_probs",
    "predict_proba_base",
    "prob_table_from_model",
    "run_pipeline",
    "select_meta",
    "split_manifest",
    "stratified_split",
    "train_builtin",
    "write_corpus_jsonl",
    "write_prob_table",
    "write_split_manifest",
]
