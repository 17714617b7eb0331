"""Experiment configuration: one JSON document driving the whole run.

Shape (all paths resolve relative to the config file's directory,
except ``output_dir`` which resolves against the working directory):

  {
    "dataset": "claims.csv",
    "label_column": "Label",
    "positive_label": "anomalous",
    "columns": [{"name": "make", "kind": "categorical"}, ...],   # optional
    "families": [
      "text_template",
      {"family": "feature_combination",
       "groups": [{"template": "The {color} {make}.", "features": ["make", "color"]}]},
      {"family": "importance_prefix", "importance_k": 4},
      {"family": "latex"}
    ],
    "shots": [0, 4, 8],
    "seeds": [0],
    "eval_size": 128,
    "token_budget": null,                                        # optional
    "keep_features": null,                                       # optional
    "predictor": {"kind": "mock", "mock_weights": {"engine failure": 2.0},
                  "mock_bias": -1.0},
    "verbalizer": {"positive_forms": ["yes"], "negative_forms": ["no"],
                   "fallback_probability": 0.5},                 # optional
    "question": "Is this vehicle claim anomalous? Yes or no?",   # optional
    "answer_choices": ["No", "Yes"],                             # optional
    "output_dir": "results"                                      # optional
  }

Omitting ``columns`` infers kinds from the data. Importance families
take either ``report`` (a path written by the rank command) or
``importance_k`` (compute the ranking from the loaded table; defaults
to 4 when the harness is allowed to compute). ``keep_features`` drops
all but the best-ranked features before the grid runs, which shortens
every serialized row.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

from .dataset import Column, KINDS, Schema, Table, infer_schema, load_table
from .errors import ValidationError
from .importance import ImportanceReport, rank_features
from .predict import PredictorConfig
from .serialize import (
    DEFAULT_CHOICES,
    DEFAULT_QUESTION,
    FAMILIES,
    FeatureGroup,
    SerializerSpec,
)
from .verbalize import Verbalizer, default_verbalizer

IMPORTANCE_FAMILIES = ("importance_prefix", "importance_suffix")
DEFAULT_IMPORTANCE_K = 4


@dataclass(frozen=True)
class FamilySpecConfig:
    """One configured serialization family and its parameters."""

    family: str
    groups: tuple[FeatureGroup, ...] = ()
    importance_k: int | None = None
    report_path: Path | None = None
    token_budget: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(self.groups))
        if self.family not in FAMILIES:
            raise ValidationError(
                f"unknown family {self.family!r}; expected one of {list(FAMILIES)}"
            )
        if self.importance_k is not None and self.importance_k < 1:
            raise ValidationError("importance_k must be at least 1")
        if self.token_budget is not None and self.token_budget < 1:
            raise ValidationError("token_budget must be at least 1")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Path
    label_column: str
    positive_label: str
    families: tuple[FamilySpecConfig, ...]
    shots: tuple[int, ...]
    seeds: tuple[int, ...]
    eval_size: int
    predictor: PredictorConfig
    columns: tuple[Column, ...] | None = None
    verbalizer: Verbalizer = field(default_factory=default_verbalizer)
    question: str = DEFAULT_QUESTION
    answer_choices: tuple[str, str] = DEFAULT_CHOICES
    output_dir: Path = Path("results")
    keep_features: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "shots", tuple(self.shots))
        object.__setattr__(self, "seeds", tuple(self.seeds))
        object.__setattr__(self, "answer_choices", tuple(self.answer_choices))
        if not self.families:
            raise ValidationError("config declares no serialization families")
        names = [fc.family for fc in self.families]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValidationError(f"families listed more than once: {duplicates}")
        if not self.shots:
            raise ValidationError("config declares no shot counts")
        if any(k < 0 for k in self.shots):
            raise ValidationError("shot counts must be non-negative")
        if not self.seeds:
            raise ValidationError("config declares no seeds")
        if self.eval_size < 1:
            raise ValidationError("eval_size must be at least 1")
        if len(self.answer_choices) != 2 or self.answer_choices[0] == self.answer_choices[1]:
            raise ValidationError("answer_choices must be two distinct strings")
        if self.keep_features is not None and self.keep_features < 1:
            raise ValidationError("keep_features must be at least 1")

    def validate_against(self, schema: Schema) -> None:
        """Check every cross-reference between this config and a schema."""
        features = set(schema.feature_names)
        for fc in self.families:
            for group in fc.groups:
                unknown = sorted(set(group.features) - features)
                if unknown:
                    raise ValidationError(
                        f"family {fc.family!r}: group members are not features "
                        f"of the dataset: {unknown}"
                    )
        if self.keep_features is not None and self.keep_features > len(features):
            raise ValidationError(
                f"keep_features={self.keep_features} exceeds the feature count "
                f"{len(features)}"
            )


def _require(data: Mapping[str, Any], key: str) -> Any:
    if key not in data:
        raise ValidationError(f"config is missing required field {key!r}")
    return data[key]


def _parse_columns(raw: Any) -> tuple[Column, ...]:
    if not isinstance(raw, list) or not raw:
        raise ValidationError("columns must be a non-empty list")
    columns = []
    for entry in raw:
        if not isinstance(entry, dict) or "name" not in entry or "kind" not in entry:
            raise ValidationError(
                "each column needs a name and a kind ('categorical' or 'numeric')"
            )
        if entry["kind"] not in KINDS:
            raise ValidationError(
                f"column {entry['name']!r} has unknown kind {entry['kind']!r}"
            )
        columns.append(Column(str(entry["name"]), entry["kind"]))
    return tuple(columns)


def _parse_groups(raw: Any) -> tuple[FeatureGroup, ...]:
    if not isinstance(raw, list):
        raise ValidationError("groups must be a list")
    groups = []
    for entry in raw:
        if not isinstance(entry, dict) or "template" not in entry or "features" not in entry:
            raise ValidationError("each group needs a template and a feature list")
        groups.append(
            FeatureGroup(str(entry["template"]), tuple(str(f) for f in entry["features"]))
        )
    return tuple(groups)


def _parse_family(raw: Any, base: Path, default_budget: int | None) -> FamilySpecConfig:
    if isinstance(raw, str):
        raw = {"family": raw}
    if not isinstance(raw, dict) or "family" not in raw:
        raise ValidationError("each family entry must be a name or an object with 'family'")
    report_path = raw.get("report")
    budget = raw.get("token_budget", default_budget)
    return FamilySpecConfig(
        family=str(raw["family"]),
        groups=_parse_groups(raw.get("groups", [])),
        importance_k=None if raw.get("importance_k") is None else int(raw["importance_k"]),
        report_path=None if report_path is None else _resolve(base, report_path),
        token_budget=None if budget is None else int(budget),
    )


def _parse_predictor(raw: Any) -> PredictorConfig:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ValidationError("predictor must be an object with a 'kind'")
    allowed = {
        "kind",
        "mock_weights",
        "mock_bias",
        "endpoint_url",
        "auth_env_var",
        "timeout",
        "max_in_flight",
    }
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ValidationError(f"unknown predictor fields: {unknown}")
    return PredictorConfig(
        kind=raw["kind"],
        mock_weights=raw.get("mock_weights"),
        mock_bias=float(raw.get("mock_bias", 0.0)),
        endpoint_url=raw.get("endpoint_url"),
        auth_env_var=raw.get("auth_env_var"),
        timeout=float(raw.get("timeout", 30.0)),
        max_in_flight=int(raw.get("max_in_flight", 4)),
    )


def _parse_verbalizer(raw: Any) -> Verbalizer:
    if raw is None:
        return default_verbalizer()
    if not isinstance(raw, dict):
        raise ValidationError("verbalizer must be an object")
    return Verbalizer(
        positive_forms=frozenset(str(f) for f in raw.get("positive_forms", [])),
        negative_forms=frozenset(str(f) for f in raw.get("negative_forms", [])),
        fallback_probability=float(raw.get("fallback_probability", 0.5)),
    )


def _resolve(base: Path, value: Any) -> Path:
    path = Path(str(value))
    return path if path.is_absolute() else base / path


def load_experiment_config(path: Path | str) -> ExperimentConfig:
    """Parse and validate a config file. Raises ValidationError on any flaw."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")

    base = path.parent
    default_budget = data.get("token_budget")
    try:
        families = tuple(
            _parse_family(entry, base, default_budget)
            for entry in _require(data, "families")
        )
        config = ExperimentConfig(
            dataset=_resolve(base, _require(data, "dataset")),
            label_column=str(_require(data, "label_column")),
            positive_label=str(_require(data, "positive_label")),
            columns=_parse_columns(data["columns"]) if data.get("columns") else None,
            families=families,
            shots=tuple(int(k) for k in _require(data, "shots")),
            seeds=tuple(int(s) for s in _require(data, "seeds")),
            eval_size=int(_require(data, "eval_size")),
            predictor=_parse_predictor(_require(data, "predictor")),
            verbalizer=_parse_verbalizer(data.get("verbalizer")),
            question=str(data.get("question", DEFAULT_QUESTION)),
            answer_choices=tuple(
                str(c) for c in data.get("answer_choices", DEFAULT_CHOICES)
            ),
            output_dir=Path(str(data.get("output_dir", "results"))),
            keep_features=(
                None if data.get("keep_features") is None else int(data["keep_features"])
            ),
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed config value: {exc}") from None
    return config


def with_overrides(
    config: ExperimentConfig,
    *,
    dataset: Path | str | None = None,
    output_dir: Path | str | None = None,
) -> ExperimentConfig:
    """Apply command-line flag overrides on top of a loaded config."""
    if dataset is not None:
        config = replace(config, dataset=Path(dataset))
    if output_dir is not None:
        config = replace(config, output_dir=Path(output_dir))
    return config


def load_config_table(config: ExperimentConfig) -> Table:
    """Load the configured dataset, inferring the schema when undeclared."""
    if config.columns is None:
        schema = infer_schema(config.dataset, config.label_column, config.positive_label)
    else:
        schema = Schema(config.columns, config.label_column, config.positive_label)
    return load_table(config.dataset, schema)


def build_serializer_spec(
    family_config: FamilySpecConfig, table: Table, *, allow_compute: bool
) -> SerializerSpec:
    """Turn a configured family into a ready SerializerSpec.

    Importance families load their report from ``report`` when given and
    otherwise compute it from the table, but only when `allow_compute`
    is set; the serialize command requires a precomputed report.
    """
    report: ImportanceReport | None = None
    if family_config.family in IMPORTANCE_FAMILIES:
        if family_config.report_path is not None:
            report = ImportanceReport.load(family_config.report_path)
            if set(report.ranking) != set(table.schema.feature_names):
                raise ValidationError(
                    f"family {family_config.family!r}: report features do not "
                    f"match the dataset"
                )
        elif allow_compute:
            k = family_config.importance_k or DEFAULT_IMPORTANCE_K
            report = rank_features(table, k)
        else:
            raise ValidationError(
                f"family {family_config.family!r} requires a report path"
            )
    return SerializerSpec(
        family=family_config.family,
        groups=family_config.groups,
        report=report,
        token_budget=family_config.token_budget,
    )


def check_remote_credential(config: ExperimentConfig) -> None:
    """Fail fast when a remote run's credential is not available."""
    predictor = config.predictor
    if predictor.kind != "remote" or not predictor.auth_env_var:
        return
    if not os.environ.get(predictor.auth_env_var):
        raise ValidationError(
            f"credential environment variable {predictor.auth_env_var!r} is not set"
        )
