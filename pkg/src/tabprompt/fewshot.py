"""Class-stratified shot sampling and JSONL corpus emission.

`sample_shots` draws k training rows without replacement, split evenly
across the two classes (the positive class takes the extra row when k
is odd), then draws disjoint evaluation rows from the remainder in
proportion to the remainder's class ratio. Draws are deterministic in
the seed and independent of any serializer choice.

`emit_jsonl` writes the train and eval splits as JSON Lines, one object
per row with fields ``input`` (full prompt text), ``choices`` (the
negative and positive answer), and ``label`` (0 or 1).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .dataset import Table
from .errors import ValidationError
from .serialize import (
    DEFAULT_CHOICES,
    DEFAULT_QUESTION,
    SerializerSpec,
    row_prompt,
)


@dataclass(frozen=True)
class ShotSet:
    """Row indices selected for one (k, seed) draw."""

    k: int
    train_rows: tuple[int, ...]
    eval_rows: tuple[int, ...]
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "train_rows", tuple(self.train_rows))
        object.__setattr__(self, "eval_rows", tuple(self.eval_rows))
        if len(self.train_rows) != self.k:
            raise ValidationError("train_rows must hold exactly k indices")
        if set(self.train_rows) & set(self.eval_rows):
            raise ValidationError("train and eval rows must be disjoint")
        if not self.eval_rows:
            raise ValidationError("eval_rows must be non-empty")


def _eval_allocation(eval_size: int, remainder_pos: int, remainder_neg: int) -> tuple[int, int]:
    """Split eval_size across classes by largest remainder, positive first."""
    total = remainder_pos + remainder_neg
    ideal_pos = eval_size * remainder_pos / total
    ideal_neg = eval_size * remainder_neg / total
    take_pos = int(ideal_pos)
    take_neg = int(ideal_neg)
    leftover = eval_size - take_pos - take_neg
    if leftover:
        if ideal_pos - take_pos >= ideal_neg - take_neg:
            take_pos += leftover
        else:
            take_neg += leftover
    return take_pos, take_neg


def sample_shots(table: Table, k: int, seed: int, eval_size: int) -> ShotSet:
    """Draw a balanced k-shot training set and a stratified eval set.

    k may be zero, which leaves the training set empty while still
    selecting evaluation rows.
    """
    if k < 0:
        raise ValidationError("k must be non-negative")
    if eval_size < 1:
        raise ValidationError("eval_size must be at least 1")
    if table.n_rows < k + eval_size:
        raise ValidationError(
            f"table has {table.n_rows} rows, fewer than k + eval_size = {k + eval_size}"
        )

    positive = table.schema.positive_label
    pos_rows = [i for i, label in enumerate(table.labels) if label == positive]
    neg_rows = [i for i, label in enumerate(table.labels) if label != positive]

    need = -(-k // 2)  # ceil(k / 2)
    for class_name, rows in ((positive, pos_rows), (table.negative_label, neg_rows)):
        if len(rows) < need:
            raise ValidationError(
                f"class {class_name!r} has {len(rows)} rows, fewer than the "
                f"required {need} for k={k}"
            )

    rng = random.Random(seed)
    train_pos = rng.sample(pos_rows, need)
    train_neg = rng.sample(neg_rows, k - need)
    chosen = set(train_pos) | set(train_neg)

    remainder_pos = [i for i in pos_rows if i not in chosen]
    remainder_neg = [i for i in neg_rows if i not in chosen]
    take_pos, take_neg = _eval_allocation(
        eval_size, len(remainder_pos), len(remainder_neg)
    )
    if take_pos > len(remainder_pos) or take_neg > len(remainder_neg):
        raise ValidationError(
            f"eval_size={eval_size} exhausts the remaining rows of one class "
            f"(left: {len(remainder_pos)} positive, {len(remainder_neg)} negative)"
        )
    eval_pos = rng.sample(remainder_pos, take_pos)
    eval_neg = rng.sample(remainder_neg, take_neg)

    return ShotSet(
        k=k,
        train_rows=tuple(sorted(train_pos + train_neg)),
        eval_rows=tuple(sorted(eval_pos + eval_neg)),
        seed=seed,
    )


def _write_split(
    table: Table,
    rows: Sequence[int],
    spec: SerializerSpec,
    path: Path,
    question: str,
    choices: Sequence[str],
) -> None:
    positive = table.schema.positive_label
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for index in rows:
            prompt = row_prompt(table, index, spec, question, choices)
            record = {
                "input": prompt.text,
                "choices": list(prompt.answer_choices),
                "label": 1 if table.row_label(index) == positive else 0,
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def emit_jsonl(
    table: Table,
    shot_set: ShotSet,
    spec: SerializerSpec,
    out_dir: Path | str,
    *,
    question: str = DEFAULT_QUESTION,
    choices: Sequence[str] = DEFAULT_CHOICES,
) -> tuple[Path, Path]:
    """Write train.jsonl and eval.jsonl for one shot set.

    Rows appear in shot-set order and files are byte-identical across
    repeated calls with the same arguments.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_path = out_dir / "train.jsonl"
    eval_path = out_dir / "eval.jsonl"
    _write_split(table, shot_set.train_rows, spec, train_path, question, choices)
    _write_split(table, shot_set.eval_rows, spec, eval_path, question, choices)
    return train_path, eval_path
