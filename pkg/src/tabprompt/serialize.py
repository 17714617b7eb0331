"""Row serialization families and prompt assembly.

Five families turn one table row into prompt text:

- ``text_template``: "col is value" fragments joined by ", ", closed
  with a period.
- ``feature_combination``: configured groups of features render through
  sentence templates; ungrouped features fall back to text-template
  fragments appended after the group sentences.
- ``importance_prefix``: text template with "Critically, " prefixed to
  fragments whose feature is in the report's top-k.
- ``importance_suffix``: text template followed by one sentence naming
  the top-k features.
- ``latex``: escaped cell values joined by " & ", preceded by
  "\\hline " and terminated by " \\\\", with no header names.

Missing cells render as "unknown". The label column never appears in
any serialized output.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .dataset import Cell, Schema, Table, render_cell
from .errors import ValidationError
from .importance import ImportanceReport

FAMILIES = (
    "text_template",
    "feature_combination",
    "importance_prefix",
    "importance_suffix",
    "latex",
)

DEFAULT_QUESTION = "Is this vehicle claim anomalous? Yes or no?"
DEFAULT_CHOICES = ("No", "Yes")

_LATEX_ESCAPES = str.maketrans(
    {
        "&": r"\&",
        "%": r"\%",
        "$": r"\$",
        "#": r"\#",
        "_": r"\_",
        "{": r"\{",
        "}": r"\}",
        "\\": "\\textbackslash ",
        "~": "\\textasciitilde ",
        "^": "\\textasciicircum ",
    }
)

_PLACEHOLDER = re.compile(r"\{([^{}]*)\}")


@dataclass(frozen=True)
class FeatureGroup:
    """A sentence template over a set of member features.

    The template names members in "{feature}" placeholders; every
    placeholder must refer to a member of this group.
    """

    template: str
    features: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise ValidationError("a feature group needs at least one member")
        duplicates = sorted(
            {f for f in self.features if self.features.count(f) > 1}
        )
        if duplicates:
            raise ValidationError(f"group repeats features: {duplicates}")
        for name in _PLACEHOLDER.findall(self.template):
            if name not in self.features:
                raise ValidationError(
                    f"template placeholder {name!r} is not a member of its group"
                )


@dataclass(frozen=True)
class SerializerSpec:
    """A serialization family plus the parameters it needs."""

    family: str
    groups: tuple[FeatureGroup, ...] = ()
    report: ImportanceReport | None = None
    token_budget: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(self.groups))
        if self.family not in FAMILIES:
            raise ValidationError(
                f"unknown family {self.family!r}; expected one of {list(FAMILIES)}"
            )
        if self.family in ("importance_prefix", "importance_suffix") and self.report is None:
            raise ValidationError(f"family {self.family!r} requires an importance report")
        seen: set[str] = set()
        for group in self.groups:
            overlap = seen & set(group.features)
            if overlap:
                raise ValidationError(
                    f"features appear in more than one group: {sorted(overlap)}"
                )
            seen |= set(group.features)
        if self.token_budget is not None and self.token_budget < 1:
            raise ValidationError("token_budget must be at least 1")


@dataclass(frozen=True)
class Prompt:
    """A serialized row, the question asked about it, and the answer pair."""

    serialized_row: str
    question: str
    answer_choices: tuple[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "answer_choices", tuple(self.answer_choices))
        if not self.serialized_row:
            raise ValidationError("serialized_row must be non-empty")
        if len(self.answer_choices) != 2:
            raise ValidationError("answer_choices must hold exactly two entries")
        if self.answer_choices[0] == self.answer_choices[1]:
            raise ValidationError("answer_choices must be distinct")

    @property
    def text(self) -> str:
        """Full prompt text: the serialized row followed by the question."""
        if not self.question:
            return self.serialized_row
        return f"{self.serialized_row} {self.question}"


def estimate_tokens(text: str) -> int:
    """Crude token count: UTF-8 byte length divided by four, rounded up."""
    return math.ceil(len(text.encode("utf-8")) / 4)


def escape_latex(value: str) -> str:
    """Escape the ten LaTeX-special characters in one pass."""
    return value.translate(_LATEX_ESCAPES)


@dataclass(frozen=True)
class _Unit:
    """One droppable piece of a serialized row: a feature or a whole group."""

    position: int
    features: tuple[str, ...]
    group: FeatureGroup | None = None


def _check_row(row: Sequence[Cell], schema: Schema) -> None:
    if len(row) != len(schema.columns):
        raise ValidationError(
            f"row has {len(row)} cells, expected {len(schema.columns)}"
        )


def _rendered_values(row: Sequence[Cell], schema: Schema) -> dict[str, str]:
    values: dict[str, str] = {}
    for i, column in enumerate(schema.columns):
        if column.name == schema.label_column:
            continue
        values[column.name] = render_cell(row[i])
    return values


def _fragment(name: str, value: str, *, critical: bool = False) -> str:
    base = f"{name} is {value}"
    return f"Critically, {base}" if critical else base


def _join_fragments(fragments: Iterable[str]) -> str:
    return ", ".join(fragments) + "."


def _fill_template(group: FeatureGroup, values: Mapping[str, str]) -> str:
    def replace(match: re.Match) -> str:
        return values[match.group(1)]

    return _PLACEHOLDER.sub(replace, group.template)


def _units(spec: SerializerSpec, schema: Schema) -> list[_Unit]:
    features = schema.feature_names
    if spec.family != "feature_combination":
        return [_Unit(i, (f,)) for i, f in enumerate(features)]

    ordered_groups = sorted(
        spec.groups, key=lambda g: schema.index_of(g.features[0])
    )
    units = [
        _Unit(i, group.features, group) for i, group in enumerate(ordered_groups)
    ]
    grouped = {f for group in spec.groups for f in group.features}
    position = len(units)
    for feature in features:
        if feature not in grouped:
            units.append(_Unit(position, (feature,)))
            position += 1
    return units


def _check_family(spec: SerializerSpec, schema: Schema) -> None:
    feature_set = set(schema.feature_names)
    if spec.family == "feature_combination":
        for group in spec.groups:
            unknown = sorted(set(group.features) - feature_set)
            if unknown:
                raise ValidationError(
                    f"group members are not features of this schema: {unknown}"
                )
    if spec.family in ("importance_prefix", "importance_suffix"):
        report = spec.report
        assert report is not None  # guaranteed by SerializerSpec
        if not report.top_k:
            raise ValidationError("importance report has an empty top_k")
        if spec.family == "importance_prefix" and not (set(report.top_k) & feature_set):
            raise ValidationError(
                "importance report names no feature of this schema; it is stale"
            )


def _render(
    spec: SerializerSpec,
    row: Sequence[Cell],
    schema: Schema,
    keep: set[int] | None = None,
) -> str:
    _check_row(row, schema)
    _check_family(spec, schema)
    values = _rendered_values(row, schema)
    if not values:
        raise ValidationError("schema has no feature columns to serialize")

    units = _units(spec, schema)
    kept = units if keep is None else [u for u in units if u.position in keep]
    if not kept:
        raise ValidationError("cannot serialize a row with every fragment removed")

    family = spec.family
    if family == "latex":
        cells = [escape_latex(values[f]) for unit in kept for f in unit.features]
        return "\\hline " + " & ".join(cells) + " \\\\"

    if family == "feature_combination":
        parts: list[str] = []
        loose: list[str] = []
        for unit in kept:
            if unit.group is not None:
                parts.append(_fill_template(unit.group, values))
            else:
                loose.append(unit.features[0])
        if loose:
            parts.append(_join_fragments(_fragment(f, values[f]) for f in loose))
        return " ".join(parts)

    critical: frozenset[str] = frozenset()
    if family == "importance_prefix":
        critical = frozenset(spec.report.top_k)  # type: ignore[union-attr]
    fragments = [
        _fragment(f, values[f], critical=f in critical)
        for unit in kept
        for f in unit.features
    ]
    text = _join_fragments(fragments)
    if family == "importance_suffix":
        top = spec.report.top_k  # type: ignore[union-attr]
        text += (
            f" The {len(top)} most important features for the inference are: "
            f"{', '.join(top)}."
        )
    return text


def serialize_text_template(row: Sequence[Cell], schema: Schema) -> str:
    """Render "col is value" fragments for every feature, in schema order."""
    return _render(SerializerSpec("text_template"), row, schema)


def serialize_feature_combination(
    row: Sequence[Cell], schema: Schema, groups: Sequence[FeatureGroup]
) -> str:
    """Render grouped features through their templates, the rest as fragments.

    Sentences are ordered by the schema position of each group's first
    member; an empty group list reduces to the plain text template.
    """
    return _render(
        SerializerSpec("feature_combination", groups=tuple(groups)), row, schema
    )


def serialize_importance_prefix(
    row: Sequence[Cell], schema: Schema, report: ImportanceReport
) -> str:
    """Text template with top-k fragments marked by a "Critically, " prefix."""
    return _render(
        SerializerSpec("importance_prefix", report=report), row, schema
    )


def serialize_importance_suffix(
    row: Sequence[Cell], schema: Schema, report: ImportanceReport
) -> str:
    """Text template plus a closing sentence naming the top-k features."""
    return _render(
        SerializerSpec("importance_suffix", report=report), row, schema
    )


def serialize_latex(row: Sequence[Cell], schema: Schema) -> str:
    """Render the row as an escaped LaTeX table line without headers."""
    return _render(SerializerSpec("latex"), row, schema)


def serialize_row(row: Sequence[Cell], schema: Schema, spec: SerializerSpec) -> str:
    """Dispatch to the family named by the spec."""
    return _render(spec, row, schema)


def _prompt_text(serialized: str, question: str) -> str:
    return f"{serialized} {question}" if question else serialized


def _drop_order(spec: SerializerSpec, units: Sequence[_Unit]) -> list[int]:
    if spec.report is not None:
        magnitudes = {f: abs(v) for f, v in spec.report.scores.items()}

        def priority(unit: _Unit) -> float:
            return max(
                (magnitudes.get(f, -math.inf) for f in unit.features),
                default=-math.inf,
            )

        ordered = sorted(units, key=lambda u: (priority(u), -u.position))
    else:
        ordered = sorted(units, key=lambda u: -u.position)
    return [u.position for u in ordered]


def build_prompt(
    serialized: str,
    spec: SerializerSpec,
    question: str,
    choices: Sequence[str],
    *,
    row: Sequence[Cell] | None = None,
    schema: Schema | None = None,
) -> Prompt:
    """Assemble a prompt, trimming the row to fit any token budget.

    When trimming is needed, whole fragments (or LaTeX cells, or group
    sentences) are removed and the row re-rendered: least important
    first when the spec carries a report, otherwise last column first.
    Re-rendering needs the source row and schema, so callers that set a
    token budget must pass them.
    """
    prompt_choices = tuple(choices)
    budget = spec.token_budget
    if budget is None or estimate_tokens(_prompt_text(serialized, question)) <= budget:
        return Prompt(serialized, question, prompt_choices)

    if row is None or schema is None:
        raise ValidationError(
            "token budget exceeded and no row context was provided for trimming"
        )
    units = _units(spec, schema)
    keep = {u.position for u in units}
    for position in _drop_order(spec, units):
        if len(keep) == 1:
            break
        keep.discard(position)
        candidate = _render(spec, row, schema, keep)
        if estimate_tokens(_prompt_text(candidate, question)) <= budget:
            return Prompt(candidate, question, prompt_choices)
    raise ValidationError(
        f"token budget {budget} is unreachable even with a single fragment"
    )


def row_prompt(
    table: Table,
    row_index: int,
    spec: SerializerSpec,
    question: str = DEFAULT_QUESTION,
    choices: Sequence[str] = DEFAULT_CHOICES,
) -> Prompt:
    """Serialize one table row and wrap it as a prompt."""
    row = table.rows[row_index]
    serialized = serialize_row(row, table.schema, spec)
    return build_prompt(
        serialized, spec, question, choices, row=row, schema=table.schema
    )
