"""Deterministic generator for the bundled vehicle-claims demo dataset.

The dataset has seventeen feature columns plus a binary Label column
(anomalous / normal). Anomalous claims report an 'engine failure' issue
far more often than normal ones, which gives the bundled mock predictor
(keyed to that phrase) a strong but imperfect signal. Regenerating with
the same arguments reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from .dataset import Column, Schema, Table, table_to_csv

MAKES = ("Audi", "BMW", "Citroen", "Fiat", "Ford", "Mercedes", "Opel", "Toyota")
MODELS = tuple(f"series {i}" for i in range(1, 10))
COLORS = ("red", "blue", "black", "white", "silver", "green", "grey", "orange")
BODY_TYPES = ("sedan", "hatchback", "estate", "coupe", "van", "suv")
GEARBOXES = ("manual", "automatic")
FUEL_TYPES = ("petrol", "diesel", "hybrid", "electric")
ISSUE_TYPES = (
    "engine failure",
    "oil leak",
    "brake wear",
    "clutch slip",
    "rust damage",
    "electrical fault",
    "suspension noise",
    "cracked windshield",
    "tyre wear",
    "exhaust smoke",
)
ISSUE_DETAILS = (
    "reported during inspection",
    "found after breakdown",
    "intermittent for two weeks",
    "noticed by previous owner",
    "confirmed by mechanic",
    "visible on test drive",
)

COLUMNS = (
    Column("make", "categorical"),
    Column("model", "categorical"),
    Column("color", "categorical"),
    Column("registration_year", "numeric"),
    Column("body_type", "categorical"),
    Column("engine_size", "numeric"),
    Column("gearbox", "categorical"),
    Column("fuel_type", "categorical"),
    Column("mileage", "numeric"),
    Column("price", "numeric"),
    Column("seats", "numeric"),
    Column("doors", "numeric"),
    Column("issue_type", "categorical"),
    Column("issue_detail", "categorical"),
    Column("repair_complexity", "numeric"),
    Column("repair_duration", "numeric"),
    Column("repair_cost", "numeric"),
    Column("Label", "categorical"),
)


def generate_vehicle_claims(n_rows: int = 1400, seed: int = 7) -> Table:
    """Build the demo table with an even anomalous/normal split."""
    if n_rows < 2 or n_rows % 2:
        raise ValueError("n_rows must be an even number of at least 2")
    rng = random.Random(seed)
    labels = ["anomalous"] * (n_rows // 2) + ["normal"] * (n_rows // 2)
    rng.shuffle(labels)

    rows = []
    for label in labels:
        anomalous = label == "anomalous"
        issue_rate = 0.8 if anomalous else 0.05
        issue = (
            "engine failure"
            if rng.random() < issue_rate
            else rng.choice(ISSUE_TYPES[1:])
        )
        base_cost = rng.randint(50, 6000)
        cost = base_cost * (2 if anomalous else 1) + rng.randint(0, 400)
        rows.append(
            (
                rng.choice(MAKES),
                rng.choice(MODELS),
                rng.choice(COLORS),
                float(rng.randint(1998, 2023)),
                rng.choice(BODY_TYPES),
                None if rng.random() < 0.02 else round(rng.uniform(1.0, 4.0), 1),
                rng.choice(GEARBOXES),
                rng.choice(FUEL_TYPES),
                float(rng.randint(5000, 250000)),
                float(rng.randint(500, 60000)),
                float(rng.randint(2, 7)),
                float(rng.randint(2, 5)),
                issue,
                None if rng.random() < 0.03 else rng.choice(ISSUE_DETAILS),
                float(rng.randint(1, 5)),
                float(rng.randint(1, 80)),
                float(cost),
                label,
            )
        )
    schema = Schema(COLUMNS, label_column="Label", positive_label="anomalous")
    return Table(schema, tuple(rows))


def example_config() -> dict:
    """The bundled experiment config, as a JSON-ready dict."""
    return {
        "dataset": "vehicle_claims.csv",
        "label_column": "Label",
        "positive_label": "anomalous",
        "families": [
            "text_template",
            {
                "family": "feature_combination",
                "groups": [
                    {
                        "template": "The {color} {make} {model} has a {body_type} body.",
                        "features": ["make", "model", "color", "body_type"],
                    }
                ],
            },
            {"family": "importance_prefix", "importance_k": 4},
            "latex",
        ],
        "shots": [0, 4, 8, 16, 32, 64, 128, 256, 512],
        "seeds": [0],
        "eval_size": 128,
        "predictor": {
            "kind": "mock",
            "mock_weights": {"engine failure": 2.0},
            "mock_bias": -1.0,
        },
        "question": "Is this vehicle claim anomalous? Yes or no?",
        "answer_choices": ["No", "Yes"],
        "output_dir": "results",
    }


def write_example_files(out_dir: Path | str) -> tuple[Path, Path]:
    """Write the demo CSV and config into a directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = table_to_csv(generate_vehicle_claims(), out_dir / "vehicle_claims.csv")
    config_path = out_dir / "vehicle_claims_config.json"
    config_path.write_text(
        json.dumps(example_config(), indent=2) + "\n", encoding="utf-8"
    )
    return csv_path, config_path
