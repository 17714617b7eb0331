"""Typed tabular datasets backed by CSV files.

A `Schema` declares column names, per-column kinds (categorical or
numeric), the label column, and which label value counts as positive.
A `Table` pairs a schema with parsed row data and validates its
invariants on construction. `one_hot_encode` expands a table into the
dense real matrix used by feature ranking.

Missing cells are the empty string or the token "NA" in source files.
They are stored as `None`, rendered as "unknown" by the serializers,
and encoded as an all-zeros block in one-hot form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from .errors import ValidationError

Kind = Literal["categorical", "numeric"]
Cell = str | float | None

KINDS: tuple[Kind, ...] = ("categorical", "numeric")
MISSING_TOKENS = ("", "NA")
MISSING_TEXT = "unknown"


@dataclass(frozen=True)
class Column:
    name: str
    kind: Kind


@dataclass(frozen=True)
class Schema:
    """Column declarations plus the label contract for one dataset.

    Column order is significant: serializers emit features in schema
    order. The label column is always categorical because label cells
    are class names compared as text.
    """

    columns: tuple[Column, ...]
    label_column: str
    positive_label: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if not names:
            raise ValidationError("schema declares no columns")
        if any(not n for n in names):
            raise ValidationError("column names must be non-empty")
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValidationError(f"duplicate column names: {duplicates}")
        for column in self.columns:
            if column.kind not in KINDS:
                raise ValidationError(
                    f"column {column.name!r} has unknown kind {column.kind!r}"
                )
        if self.label_column not in names:
            raise ValidationError(
                f"label column {self.label_column!r} is not among the declared columns"
            )
        if self.kind_of(self.label_column) != "categorical":
            raise ValidationError("the label column must be categorical")
        if not self.positive_label:
            raise ValidationError("positive_label must be non-empty")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def feature_columns(self) -> tuple[Column, ...]:
        return tuple(c for c in self.columns if c.name != self.label_column)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.feature_columns)

    @property
    def label_index(self) -> int:
        return self.index_of(self.label_column)

    def index_of(self, name: str) -> int:
        for i, column in enumerate(self.columns):
            if column.name == name:
                return i
        raise ValidationError(f"unknown column {name!r}")

    def kind_of(self, name: str) -> Kind:
        return self.columns[self.index_of(name)].kind


@dataclass(frozen=True)
class Table:
    """Immutable parsed rows conforming to a schema.

    Rows hold `str` cells for categorical columns, `float` cells for
    numeric columns, and `None` for missing values. Label cells must be
    present and drawn from exactly two observed values, one of which is
    the schema's positive label.
    """

    schema: Schema
    rows: tuple[tuple[Cell, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(tuple(row) for row in self.rows))
        width = len(self.schema.columns)
        label_index = self.schema.label_index
        observed: list[str] = []
        for i, row in enumerate(self.rows, start=1):
            if len(row) != width:
                raise ValidationError(
                    f"data row {i} has {len(row)} cells, expected {width}"
                )
            for column, cell in zip(self.schema.columns, row):
                _check_cell(column, cell, i)
            label = row[label_index]
            if label is None or not isinstance(label, str) or is_missing(label):
                raise ValidationError(
                    f"data row {i}: label cell is missing or not text"
                )
            if label not in observed:
                observed.append(label)  # type: ignore[arg-type]
                if len(observed) > 2:
                    raise ValidationError(
                        f"label column {self.schema.label_column!r} has more than two "
                        f"values; data row {i} introduces {label!r}"
                    )
        if not self.rows:
            raise ValidationError("table has no rows")
        if len(observed) != 2:
            raise ValidationError(
                f"label column {self.schema.label_column!r} must contain exactly two "
                f"distinct values, found {observed}"
            )
        if self.schema.positive_label not in observed:
            raise ValidationError(
                f"positive label {self.schema.positive_label!r} never occurs in the "
                f"label column (observed {sorted(observed)})"
            )

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def labels(self) -> tuple[str, ...]:
        i = self.schema.label_index
        return tuple(row[i] for row in self.rows)  # type: ignore[misc]

    @property
    def negative_label(self) -> str:
        for label in self.labels:
            if label != self.schema.positive_label:
                return label
        raise ValidationError("table has no negative rows")  # pragma: no cover

    @property
    def target(self) -> np.ndarray:
        """Label column encoded as 1.0 for the positive class, 0.0 otherwise."""
        positive = self.schema.positive_label
        return np.array([1.0 if v == positive else 0.0 for v in self.labels])

    def column(self, name: str) -> tuple[Cell, ...]:
        i = self.schema.index_of(name)
        return tuple(row[i] for row in self.rows)

    def row_label(self, index: int) -> str:
        return self.rows[index][self.schema.label_index]  # type: ignore[return-value]


@dataclass(frozen=True)
class EncodedMatrix:
    """One-hot expansion of a table, with the target vector kept separate."""

    column_names: tuple[str, ...]
    values: np.ndarray
    feature_of: Mapping[str, str]
    target: np.ndarray


def _check_cell(column: Column, cell: Cell, row_number: int) -> None:
    if cell is None:
        return
    if column.kind == "numeric":
        if isinstance(cell, bool) or not isinstance(cell, (int, float)):
            raise ValidationError(
                f"data row {row_number}, column {column.name!r}: numeric cell "
                f"holds {cell!r}"
            )
        if not math.isfinite(cell):
            raise ValidationError(
                f"data row {row_number}, column {column.name!r}: numeric cell "
                f"is not finite"
            )
    elif not isinstance(cell, str):
        raise ValidationError(
            f"data row {row_number}, column {column.name!r}: categorical cell "
            f"holds {cell!r}"
        )


def is_missing(raw: str) -> bool:
    return raw in MISSING_TOKENS


def parse_number(raw: str) -> float:
    """Parse a cell as a finite real, rejecting digit-separator underscores."""
    if "_" in raw:
        raise ValueError(f"not a plain number: {raw!r}")
    value = float(raw)
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {raw!r}")
    return value


def format_number(value: float) -> str:
    """Canonical text for a numeric cell.

    Integral values render without a decimal point; other values render
    with up to six significant digits.
    """
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return f"{value:.6g}"


def render_cell(cell: Cell) -> str:
    """Text used for a cell inside serialized prompts."""
    if cell is None:
        return MISSING_TEXT
    if isinstance(cell, str):
        return cell
    return format_number(cell)


def _read_csv(path: Path | str) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"dataset file not found: {path}")
    with open(path, encoding="utf-8-sig", newline="") as handle:
        records = list(csv.reader(handle))
    if not records:
        raise ValidationError(f"dataset file is empty: {path}")
    header, *data = records
    duplicates = sorted({n for n in header if header.count(n) > 1})
    if duplicates:
        raise ValidationError(f"duplicate header names in {path}: {duplicates}")
    if not data:
        raise ValidationError(f"dataset file has a header but no data rows: {path}")
    return header, data


def load_table(path: Path | str, schema: Schema) -> Table:
    """Parse a CSV file against a declared schema.

    The header must contain exactly the schema's column names; the file
    may order them differently, in which case cells are re-mapped so that
    row layout follows schema order.
    """
    header, data = _read_csv(path)
    expected = set(schema.names)
    got = set(header)
    if expected != got:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        detail = []
        if missing:
            detail.append(f"missing columns {missing}")
        if extra:
            detail.append(f"unexpected columns {extra}")
        raise ValidationError(f"header does not match schema: {', '.join(detail)}")
    position = {name: header.index(name) for name in schema.names}

    rows: list[tuple[Cell, ...]] = []
    for i, record in enumerate(data, start=1):
        if len(record) != len(header):
            raise ValidationError(
                f"data row {i} has {len(record)} cells, expected {len(header)}"
            )
        cells: list[Cell] = []
        for column in schema.columns:
            raw = record[position[column.name]]
            if column.name == schema.label_column:
                if is_missing(raw):
                    raise ValidationError(f"data row {i}: label cell is missing")
                cells.append(raw)
            elif is_missing(raw):
                cells.append(None)
            elif column.kind == "numeric":
                try:
                    cells.append(parse_number(raw))
                except ValueError:
                    raise ValidationError(
                        f"data row {i}, column {column.name!r}: cannot parse "
                        f"{raw!r} as a number"
                    ) from None
            else:
                cells.append(raw)
        rows.append(tuple(cells))
    return Table(schema, tuple(rows))


def infer_schema(path: Path | str, label_column: str, positive_label: str) -> Schema:
    """Derive a schema from a CSV file.

    A column is numeric iff every non-missing cell parses as a finite
    real. The label column is always categorical.
    """
    header, data = _read_csv(path)
    if label_column not in header:
        raise ValidationError(f"label column {label_column!r} not found in header")

    columns: list[Column] = []
    for j, name in enumerate(header):
        if name == label_column:
            columns.append(Column(name, "categorical"))
            continue
        numeric = True
        for record in data:
            raw = record[j] if j < len(record) else ""
            if is_missing(raw):
                continue
            try:
                parse_number(raw)
            except ValueError:
                numeric = False
                break
        columns.append(Column(name, "numeric" if numeric else "categorical"))
    return Schema(tuple(columns), label_column, positive_label)


def one_hot_encode(table: Table) -> EncodedMatrix:
    """Expand a table into a dense real matrix.

    Numeric columns pass through under their own names, with missing
    cells filled by the column mean so downstream covariance stays
    finite. Each categorical column becomes one indicator column per
    observed level, named "feature=level" with levels in lexicographic
    order; a missing cell yields all zeros across its feature's block.
    """
    schema = table.schema
    names: list[str] = []
    feature_of: dict[str, str] = {}
    blocks: list[np.ndarray] = []
    n = table.n_rows

    for column in schema.feature_columns:
        cells = table.column(column.name)
        if column.kind == "numeric":
            present = [c for c in cells if c is not None]
            fill = float(np.mean(present)) if present else 0.0
            values = np.array([c if c is not None else fill for c in cells])
            names.append(column.name)
            feature_of[column.name] = column.name
            blocks.append(values)
        else:
            levels = sorted({c for c in cells if c is not None})
            for level in levels:
                encoded_name = f"{column.name}={level}"
                names.append(encoded_name)
                feature_of[encoded_name] = column.name
                blocks.append(np.array([1.0 if c == level else 0.0 for c in cells]))

    values = np.column_stack(blocks) if blocks else np.empty((n, 0))
    return EncodedMatrix(tuple(names), values, feature_of, table.target)


def table_to_csv(table: Table, path: Path | str) -> Path:
    """Write a table back out as CSV in schema column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(table.schema.names)
        for row in table.rows:
            writer.writerow(["" if c is None else c if isinstance(c, str) else format_number(c) for c in row])
    return path


def build_table(
    schema: Schema, rows: Iterable[Sequence[Cell]]
) -> Table:
    """Convenience constructor accepting any iterable of row sequences."""
    return Table(schema, tuple(tuple(row) for row in rows))
