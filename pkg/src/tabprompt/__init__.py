"""Serialize table rows into prompt text and evaluate the serialization
choices with a few-shot AUC harness."""

from .config import (
    ExperimentConfig,
    FamilySpecConfig,
    load_experiment_config,
)
from .dataset import (
    Column,
    EncodedMatrix,
    Schema,
    Table,
    infer_schema,
    load_table,
    one_hot_encode,
)
from .errors import PredictionError, TabpromptError, ValidationError
from .evaluate import EvalResult, GridError, auc, run_experiment
from .fewshot import ShotSet, emit_jsonl, sample_shots
from .importance import (
    ImportanceReport,
    covariance,
    drop_least_important,
    rank_features,
)
from .predict import (
    PredictionScore,
    PredictorConfig,
    mock_score,
    remote_score,
    score_prompts,
)
from .report import emit_results_table, render_auc_curves
from .serialize import (
    FeatureGroup,
    Prompt,
    SerializerSpec,
    build_prompt,
    escape_latex,
    estimate_tokens,
    row_prompt,
    serialize_feature_combination,
    serialize_importance_prefix,
    serialize_importance_suffix,
    serialize_latex,
    serialize_row,
    serialize_text_template,
)
from .verbalize import Verbalizer, default_verbalizer, map_output

__version__ = "0.1.0"

__all__ = [
    "Column",
    "EncodedMatrix",
    "EvalResult",
    "ExperimentConfig",
    "FamilySpecConfig",
    "FeatureGroup",
    "GridError",
    "ImportanceReport",
    "PredictionError",
    "PredictionScore",
    "PredictorConfig",
    "Prompt",
    "Schema",
    "SerializerSpec",
    "ShotSet",
    "Table",
    "TabpromptError",
    "ValidationError",
    "Verbalizer",
    "auc",
    "build_prompt",
    "covariance",
    "default_verbalizer",
    "drop_least_important",
    "emit_jsonl",
    "emit_results_table",
    "escape_latex",
    "estimate_tokens",
    "infer_schema",
    "load_experiment_config",
    "load_table",
    "map_output",
    "mock_score",
    "one_hot_encode",
    "rank_features",
    "remote_score",
    "render_auc_curves",
    "row_prompt",
    "run_experiment",
    "sample_shots",
    "score_prompts",
    "serialize_feature_combination",
    "serialize_importance_prefix",
    "serialize_importance_suffix",
    "serialize_latex",
    "serialize_row",
    "serialize_text_template",
    "__version__",
]
