"""Result reporting: the delimited summary table, raw cells, and figures.

The CSV mirrors the layout serialization families are usually compared
in: one row per family, one column per shot count in config order, each
cell the mean AUC over seeds at three decimals. The JSON file carries
every raw cell for downstream analysis, and the figure plots mean AUC
against shot count with one line per family.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import ValidationError
from .evaluate import EvalResult


def emit_results_table(result: EvalResult, out_dir: Path | str) -> tuple[Path, Path]:
    """Write results.csv and results.json under the output directory."""
    if not result.cells:
        raise ValidationError("no completed cells to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    json_path = out_dir / "results.json"

    with open(csv_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["Serialization Method", *[str(k) for k in result.shots]])
        for family in result.families:
            cells = []
            for shots in result.shots:
                mean = result.mean_auc(family, shots)
                cells.append("" if mean is None else f"{mean:.3f}")
            writer.writerow([family, *cells])

    records = []
    for family in result.families:
        for shots in result.shots:
            for seed in result.seeds:
                key = (family, shots, seed)
                if key not in result.cells:
                    continue
                records.append(
                    {
                        "family": family,
                        "shots": shots,
                        "seed": seed,
                        "auc": result.cells[key],
                        "unmatched": result.unmatched.get(key, 0),
                    }
                )
    payload = {
        "families": list(result.families),
        "shots": list(result.shots),
        "seeds": list(result.seeds),
        "cells": records,
    }
    with open(json_path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, indent=2, ensure_ascii=False)
        handle.write("\n")
    return csv_path, json_path


def render_auc_curves(result: EvalResult, path: Path | str) -> Path:
    """Plot mean AUC against shot count, one line per family, to a file."""
    if not result.cells:
        raise ValidationError("no completed cells to plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    positions = range(len(result.shots))
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for family in result.families:
        means = [result.mean_auc(family, shots) for shots in result.shots]
        xs = [x for x, m in zip(positions, means) if m is not None]
        ys = [m for m in means if m is not None]
        ax.plot(xs, ys, marker="o", label=family)
    ax.set_xticks(list(positions))
    ax.set_xticklabels([str(k) for k in result.shots])
    ax.set_xlabel("Training shots")
    ax.set_ylabel("AUC")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)
    return path
