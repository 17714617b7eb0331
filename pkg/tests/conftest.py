"""Shared builders for the test suite."""

from __future__ import annotations

import random

import pytest

from tabprompt.dataset import Column, Schema, Table
from tabprompt.importance import ImportanceReport


def make_schema(
    columns: list[tuple[str, str]],
    label_column: str = "Label",
    positive_label: str = "yes",
) -> Schema:
    return Schema(
        tuple(Column(name, kind) for name, kind in columns),
        label_column,
        positive_label,
    )


def random_table(
    rng: random.Random,
    *,
    n_features: int | None = None,
    n_rows: int | None = None,
    numeric_missing: bool = True,
) -> Table:
    """A small random table whose label tokens never occur in feature values."""
    n_features = n_features if n_features is not None else rng.randint(1, 10)
    n_rows = n_rows if n_rows is not None else rng.randint(2, 50)
    columns = [
        Column(f"f{i}", "numeric" if rng.random() < 0.5 else "categorical")
        for i in range(n_features)
    ]
    columns.append(Column("Label", "categorical"))
    schema = Schema(tuple(columns), "Label", "__pos__")

    labels = ["__pos__", "__neg__"]
    labels += [rng.choice(("__pos__", "__neg__")) for _ in range(n_rows - 2)]
    rng.shuffle(labels)

    levels = ("lvl_a", "lvl_b", "lvl_c", "lvl_d")
    rows = []
    for r in range(n_rows):
        cells: list = []
        for column in columns[:-1]:
            if column.kind == "numeric":
                if numeric_missing and rng.random() < 0.1:
                    cells.append(None)
                else:
                    cells.append(float(rng.randint(-8, 8)))
            elif rng.random() < 0.1:
                cells.append(None)
            else:
                cells.append(rng.choice(levels))
        cells.append(labels[r])
        rows.append(tuple(cells))
    return Table(schema, tuple(rows))


@pytest.fixture
def claims_schema() -> Schema:
    return make_schema(
        [
            ("Make", "categorical"),
            ("color", "categorical"),
            ("price", "numeric"),
            ("issue", "categorical"),
            ("Label", "categorical"),
        ],
        label_column="Label",
        positive_label="anomalous",
    )


@pytest.fixture
def claims_table(claims_schema: Schema) -> Table:
    rows = (
        ("Ford", "red", 5000.0, "engine failure", "anomalous"),
        ("R&D_special", "blue", 12999.5, "none", "normal"),
        (None, "green", 7500.0, "oil leak", "normal"),
        ("Opel", "50%_off", 100.0, "none", "normal"),
        ("Vauxhall", "red", None, "engine failure", "anomalous"),
    )
    return Table(claims_schema, rows)


@pytest.fixture
def claims_report() -> ImportanceReport:
    return ImportanceReport(
        scores={"Make": 0.05, "color": -0.2, "price": 120.0, "issue": 0.3},
        ranking=("price", "issue", "color", "Make"),
        top_k=("price", "issue"),
        k=2,
    )
