"""AUC scoring and the (family x shots x seed) experiment grid.

`auc` is the probability that a random positive row outscores a random
negative one, with ties worth half credit. It runs on tie-corrected
ranks in O(n log n) and agrees exactly with the quadratic pair count.

`run_experiment` executes every grid cell: sample shots, write the
JSONL corpus (zero-shot cells skip this), score the evaluation rows
through the configured predictor, and record the cell's AUC. A failing
cell does not stop the others; when any cell fails, the partial result
travels inside a `GridError`.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import ExperimentConfig, build_serializer_spec, load_config_table
from .dataset import Table
from .errors import TabpromptError, ValidationError
from .fewshot import emit_jsonl, sample_shots
from .importance import drop_least_important, rank_features
from .predict import score_prompts
from .serialize import SerializerSpec, row_prompt

logger = logging.getLogger(__name__)

Cell = tuple[str, int, int]


@dataclass
class EvalResult:
    """All completed grid cells plus the grid definition that ordered them.

    `runtime` is informational and excluded from equality so that two
    runs of the same config compare equal.
    """

    families: tuple[str, ...]
    shots: tuple[int, ...]
    seeds: tuple[int, ...]
    cells: dict[Cell, float] = field(default_factory=dict)
    unmatched: dict[Cell, int] = field(default_factory=dict)
    runtime: dict[Cell, float] = field(default_factory=dict, compare=False)

    def mean_auc(self, family: str, shots: int) -> float | None:
        values = [
            self.cells[(family, shots, seed)]
            for seed in self.seeds
            if (family, shots, seed) in self.cells
        ]
        if not values:
            return None
        return float(sum(values) / len(values))


@dataclass(frozen=True)
class CellFailure:
    family: str
    shots: int
    seed: int
    error: str


class GridError(TabpromptError):
    """One or more grid cells failed; completed cells are preserved."""

    def __init__(self, result: EvalResult, failures: Sequence[CellFailure]) -> None:
        self.result = result
        self.failures = tuple(failures)
        summary = "; ".join(
            f"({f.family}, k={f.shots}, seed={f.seed}): {f.error}" for f in failures
        )
        super().__init__(f"{len(failures)} grid cell(s) failed: {summary}")


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC with half credit for tied scores."""
    score_array = np.asarray(scores, dtype=float)
    label_array = np.asarray(labels)
    if score_array.ndim != 1 or label_array.ndim != 1:
        raise ValidationError("auc expects one-dimensional inputs")
    if score_array.shape[0] != label_array.shape[0]:
        raise ValidationError(
            f"auc length mismatch: {score_array.shape[0]} scores vs "
            f"{label_array.shape[0]} labels"
        )
    if not np.isin(label_array, (0, 1)).all():
        raise ValidationError("labels must be 0 or 1")
    n_pos = int((label_array == 1).sum())
    n_neg = int((label_array == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("auc requires at least one row of each class")

    order = np.argsort(score_array, kind="mergesort")
    sorted_scores = score_array[order]
    ranks = np.empty(score_array.shape[0])
    i = 0
    n = score_array.shape[0]
    while i < n:
        j = i
        while j < n and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2  # mean of 1-based ranks i+1 .. j
        i = j
    rank_sum = float(ranks[label_array == 1].sum())
    u_statistic = rank_sum - n_pos * (n_pos + 1) / 2
    return float(u_statistic / (n_pos * n_neg))


def _prepare_table(config: ExperimentConfig) -> Table:
    table = load_config_table(config)
    config.validate_against(table.schema)
    if config.keep_features is not None:
        report = rank_features(table, config.keep_features)
        table = drop_least_important(table, report, config.keep_features)
    return table


def _run_cell(
    config: ExperimentConfig,
    table: Table,
    family: str,
    spec: SerializerSpec,
    shots: int,
    seed: int,
) -> tuple[float, int]:
    shot_set = sample_shots(table, shots, seed, config.eval_size)
    if shots > 0:
        cell_dir = config.output_dir / "corpora" / family / f"k{shots}_seed{seed}"
        emit_jsonl(
            table,
            shot_set,
            spec,
            cell_dir,
            question=config.question,
            choices=config.answer_choices,
        )
    prompts = [
        row_prompt(table, i, spec, config.question, config.answer_choices)
        for i in shot_set.eval_rows
    ]
    labels = [
        1 if table.row_label(i) == table.schema.positive_label else 0
        for i in shot_set.eval_rows
    ]
    scores, unmatched = score_prompts(
        prompts,
        config.predictor,
        config.verbalizer,
        row_indices=list(shot_set.eval_rows),
    )
    value = auc([s.positive_probability for s in scores], labels)
    return value, unmatched


def run_experiment(config: ExperimentConfig) -> EvalResult:
    """Run every (family, shots, seed) cell of the configured grid.

    Returns the full result when every cell completes; otherwise raises
    `GridError` carrying the completed cells and per-cell failures.
    """
    table = _prepare_table(config)
    specs = {
        fc.family: build_serializer_spec(fc, table, allow_compute=True)
        for fc in config.families
    }

    result = EvalResult(
        families=tuple(fc.family for fc in config.families),
        shots=tuple(config.shots),
        seeds=tuple(config.seeds),
    )
    failures: list[CellFailure] = []
    for family_config in config.families:
        family = family_config.family
        for shots in config.shots:
            for seed in config.seeds:
                started = time.perf_counter()
                try:
                    value, unmatched = _run_cell(
                        config, table, family, specs[family], shots, seed
                    )
                except Exception as exc:  # noqa: BLE001 - cell isolation
                    failures.append(
                        CellFailure(family, shots, seed, f"{type(exc).__name__}: {exc}")
                    )
                    logger.error(
                        "cell family=%s shots=%d seed=%d failed: %s",
                        family,
                        shots,
                        seed,
                        exc,
                    )
                    continue
                elapsed = time.perf_counter() - started
                key = (family, shots, seed)
                result.cells[key] = value
                result.unmatched[key] = unmatched
                result.runtime[key] = elapsed
                logger.info(
                    "cell family=%s shots=%d seed=%d auc=%.3f unmatched=%d runtime=%.2fs",
                    family,
                    shots,
                    seed,
                    value,
                    unmatched,
                    elapsed,
                )
    if failures:
        raise GridError(result, failures)
    return result
