"""Covariance-based feature ranking.

Features are scored by one-hot encoding the table, computing the sample
covariance of every encoded column against the binary target, and
summarizing each source feature by the signed covariance of its largest
magnitude encoded column. Ranking sorts by absolute score, descending,
with ties broken by schema column order. Raw feature values are never
standardized first; scores are covariances on the original scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import Column, Schema, Table, one_hot_encode
from .errors import ValidationError


@dataclass(frozen=True)
class ImportanceReport:
    """Per-feature scores plus the derived ranking and its top-k prefix."""

    scores: Mapping[str, float]
    ranking: tuple[str, ...]
    top_k: tuple[str, ...]
    k: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", dict(self.scores))
        object.__setattr__(self, "ranking", tuple(self.ranking))
        object.__setattr__(self, "top_k", tuple(self.top_k))
        if self.k < 1:
            raise ValidationError("k must be at least 1")
        if set(self.ranking) != set(self.scores) or len(self.ranking) != len(self.scores):
            raise ValidationError("ranking must be a permutation of the scored features")
        if self.top_k != self.ranking[: len(self.top_k)]:
            raise ValidationError("top_k must be a prefix of the ranking")
        if len(self.top_k) != min(self.k, len(self.ranking)):
            raise ValidationError("top_k length must be min(k, feature count)")
        magnitudes = [abs(self.scores[name]) for name in self.ranking]
        if any(a < b for a, b in zip(magnitudes, magnitudes[1:])):
            raise ValidationError("scores must be non-increasing in magnitude along the ranking")

    def to_dict(self) -> dict:
        return {
            "scores": dict(self.scores),
            "ranking": list(self.ranking),
            "top_k": list(self.top_k),
            "k": self.k,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ImportanceReport":
        try:
            return cls(
                scores={str(k): float(v) for k, v in data["scores"].items()},
                ranking=tuple(data["ranking"]),
                top_k=tuple(data["top_k"]),
                k=int(data["k"]),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValidationError(f"malformed importance report: {exc}") from None

    @classmethod
    def load(cls, path: Path | str) -> "ImportanceReport":
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"importance report not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"importance report is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def dump(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path


def covariance(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> float:
    """Sample covariance with the n-1 denominator."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.ndim != 1 or ys.ndim != 1:
        raise ValidationError("covariance expects one-dimensional vectors")
    if xs.shape[0] != ys.shape[0]:
        raise ValidationError(
            f"covariance length mismatch: {xs.shape[0]} vs {ys.shape[0]}"
        )
    n = xs.shape[0]
    if n < 2:
        raise ValidationError("covariance requires at least two observations")
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise ValidationError("covariance requires finite inputs")
    return float(np.sum((xs - xs.mean()) * (ys - ys.mean())) / (n - 1))


def rank_features(table: Table, k: int) -> ImportanceReport:
    """Score and rank every non-label feature against the target.

    A categorical feature's score is the covariance of its strongest
    level indicator (largest absolute covariance, first such level in
    encoded column order). A feature with no encoded columns, which
    happens when every cell is missing, scores 0.0.
    """
    if k < 1:
        raise ValidationError("k must be at least 1")
    if table.n_rows < 2:
        raise ValidationError("ranking requires at least two rows")
    schema = table.schema
    features = schema.feature_names
    if not features:
        raise ValidationError("table contains only the label column")

    encoded = one_hot_encode(table)
    best: dict[str, float] = {}
    for j, name in enumerate(encoded.column_names):
        feature = encoded.feature_of[name]
        score = covariance(encoded.values[:, j], encoded.target)
        if feature not in best or abs(score) > abs(best[feature]):
            best[feature] = score

    scores = {f: best.get(f, 0.0) for f in features}
    ranking = tuple(
        sorted(features, key=lambda f: (-abs(scores[f]), schema.index_of(f)))
    )
    top_k = ranking[: min(k, len(ranking))]
    return ImportanceReport(scores=scores, ranking=ranking, top_k=top_k, k=k)


def drop_least_important(table: Table, report: ImportanceReport, keep: int) -> Table:
    """Return a table keeping only the label and the top `keep` features.

    Surviving columns retain their original schema order.
    """
    schema = table.schema
    features = schema.feature_names
    if keep < 1:
        raise ValidationError("keep must be at least 1")
    if keep > len(features):
        raise ValidationError(
            f"keep={keep} exceeds the feature count {len(features)}"
        )
    if set(report.ranking) != set(features):
        raise ValidationError(
            "importance report does not cover this table's features"
        )

    survivors = set(report.ranking[:keep]) | {schema.label_column}
    kept_indices = [
        i for i, column in enumerate(schema.columns) if column.name in survivors
    ]
    new_columns = tuple(
        Column(schema.columns[i].name, schema.columns[i].kind) for i in kept_indices
    )
    new_schema = Schema(new_columns, schema.label_column, schema.positive_label)
    new_rows = tuple(tuple(row[i] for i in kept_indices) for row in table.rows)
    return Table(new_schema, new_rows)
