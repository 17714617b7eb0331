"""Command-line interface.

Subcommands:

- ``rank``: score and rank features, writing the report as JSON.
- ``serialize``: draw one shot set and write train/eval JSONL corpora.
- ``eval``: run the full experiment grid, writing the results table,
  raw cells, figure, and per-cell corpora.
- ``example``: copy the bundled demo dataset and config somewhere
  editable.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or
arguments. Nothing is written outside the requested output location.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from importlib import resources
from pathlib import Path

from .config import (
    build_serializer_spec,
    check_remote_credential,
    load_config_table,
    load_experiment_config,
    with_overrides,
    FamilySpecConfig,
)
from .dataset import infer_schema, load_table
from .errors import TabpromptError, ValidationError
from .evaluate import GridError, run_experiment
from .fewshot import emit_jsonl, sample_shots
from .importance import rank_features
from .report import emit_results_table, render_auc_curves

logger = logging.getLogger(__name__)


def cmd_rank(args: argparse.Namespace) -> int:
    schema = infer_schema(args.data, args.label_col, args.positive)
    table = load_table(args.data, schema)
    report = rank_features(table, args.k)
    out = report.dump(args.out)
    print(out)
    return 0


def cmd_serialize(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config)
    config = with_overrides(config, dataset=args.data)
    table = load_config_table(config)
    config.validate_against(table.schema)

    family_config = next(
        (fc for fc in config.families if fc.family == args.family),
        None,
    )
    if family_config is None:
        family_config = FamilySpecConfig(family=args.family)
    spec = build_serializer_spec(family_config, table, allow_compute=False)

    shot_set = sample_shots(table, args.shots, args.seed, config.eval_size)
    train_path, eval_path = emit_jsonl(
        table,
        shot_set,
        spec,
        args.out,
        question=config.question,
        choices=config.answer_choices,
    )
    print(train_path)
    print(eval_path)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config)
    config = with_overrides(config, output_dir=args.out)
    check_remote_credential(config)

    failures = []
    try:
        result = run_experiment(config)
    except GridError as exc:
        result = exc.result
        failures = list(exc.failures)

    out_dir = config.output_dir
    if result.cells:
        csv_path, json_path = emit_results_table(result, out_dir)
        figure_path = render_auc_curves(result, out_dir / "results.png")
        print(csv_path)
        print(json_path)
        print(figure_path)
    if failures:
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = out_dir / "failures.json"
        manifest.write_text(
            json.dumps(
                [
                    {
                        "family": f.family,
                        "shots": f.shots,
                        "seed": f.seed,
                        "error": f.error,
                    }
                    for f in failures
                ],
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        print(f"{len(failures)} grid cell(s) failed; see {manifest}", file=sys.stderr)
        return 1
    return 0


def cmd_example(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_root = resources.files("tabprompt").joinpath("data")
    for name in ("vehicle_claims.csv", "vehicle_claims_config.json"):
        source = data_root.joinpath(name)
        with resources.as_file(source) as concrete:
            shutil.copy(concrete, out_dir / name)
        print(out_dir / name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabprompt",
        description="Serialize table rows into prompts and evaluate the choices.",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log debug detail"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    rank = subparsers.add_parser("rank", help="rank features by covariance with the label")
    rank.add_argument("--data", required=True, help="CSV dataset path")
    rank.add_argument("--label-col", required=True, help="label column name")
    rank.add_argument("--positive", required=True, help="positive label value")
    rank.add_argument("--k", type=int, default=4, help="how many top features to keep")
    rank.add_argument("--out", required=True, help="where to write the report JSON")
    rank.set_defaults(func=cmd_rank)

    serialize = subparsers.add_parser(
        "serialize", help="draw one shot set and write JSONL corpora"
    )
    serialize.add_argument("--data", help="override the config's dataset path")
    serialize.add_argument("--family", required=True, help="serialization family")
    serialize.add_argument("--config", required=True, help="experiment config JSON")
    serialize.add_argument("--shots", type=int, required=True, help="training shots k")
    serialize.add_argument("--seed", type=int, required=True, help="sampling seed")
    serialize.add_argument("--out", required=True, help="output directory")
    serialize.set_defaults(func=cmd_serialize)

    evaluate = subparsers.add_parser("eval", help="run the experiment grid")
    evaluate.add_argument("--config", required=True, help="experiment config JSON")
    evaluate.add_argument("--out", help="override the config's output directory")
    evaluate.set_defaults(func=cmd_eval)

    example = subparsers.add_parser(
        "example", help="copy the bundled demo dataset and config"
    )
    example.add_argument("--out", required=True, help="destination directory")
    example.set_defaults(func=cmd_example)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TabpromptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
