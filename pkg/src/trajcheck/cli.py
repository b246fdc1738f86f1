"""Command-line interface.

Commands: generate, filter, mct, reverse, features, train, evaluate,
ablate, judge, pipeline. A JSON config file supplies defaults; every flag
listed here overrides its config counterpart. ``--dry-run`` prints the
planned stages without executing them.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline as stages
from .config import PipelineConfig, load_config
from .errors import TrajcheckError

_NEEDS_CLIENT = {"generate", "mct", "reverse", "judge", "pipeline"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajcheck",
        description="Generate synthetic agent questions and verify tool-call trajectories.",
    )
    parser.add_argument("--config", help="JSON config file (defaults apply without one)")
    parser.add_argument("--verbose", action="store_true", help="log stage progress")
    parser.add_argument(
        "--dry-run", action="store_true", help="print the planned stage graph and exit"
    )
    parser.add_argument("--seed", type=int, help="override the pipeline seed")
    parser.add_argument("--folds", type=int, help="override the CV fold count")
    parser.add_argument(
        "--mode",
        choices=("with_args", "without_args"),
        help="override the feature mode",
    )
    parser.add_argument("--workdir", help="override the pipeline work directory")
    parser.add_argument(
        "--client-type", choices=("demo", "mock", "http"), help="override the client type"
    )
    parser.add_argument("--mock-script", help="mock client script path")
    parser.add_argument("--record-script", help="record served responses to a script file")
    parser.add_argument("--annotations", help="annotation file with {id, label} lines")
    parser.add_argument("--drop-list", help="manual drop list (one question id per line)")

    sub = parser.add_subparsers(dest="command", required=True)

    command = sub.add_parser("generate", help="write candidate questions from a seed dataset")
    command.add_argument("seed_dataset")
    command.add_argument("-o", "--out", default="candidates.jsonl")

    command = sub.add_parser("filter", help="diversity-filter candidate questions")
    command.add_argument("candidates")
    command.add_argument("-o", "--out", default="filtered.jsonl")
    command.add_argument("--report", default="filter_report.csv")

    command = sub.add_parser("mct", help="answer questions repeatedly and keep the modal trajectory")
    command.add_argument("questions")
    command.add_argument("-o", "--out", default="dataset.jsonl")

    command = sub.add_parser("reverse", help="build verification cases from responses")
    command.add_argument("dataset")
    command.add_argument("-o", "--out", default="cases.jsonl")

    command = sub.add_parser("features", help="export trajectory feature vectors")
    command.add_argument("cases")
    command.add_argument("-o", "--out", default="features.csv")

    command = sub.add_parser("train", help="train one classifier on all cases")
    command.add_argument("cases")
    command.add_argument("-o", "--out", default="model.json")
    command.add_argument("--algorithm", help="which configured classifier to train")

    command = sub.add_parser("evaluate", help="cross-validate the configured classifiers")
    command.add_argument("cases")
    command.add_argument("--report", default="cv_report.json")
    command.add_argument("--summary", default="cv_summary.csv")

    command = sub.add_parser("ablate", help="evaluate all trajectory-feature subsets")
    command.add_argument("cases")
    command.add_argument("--report", default="ablation_report.json")
    command.add_argument("--table", default="ablation_table.csv")

    command = sub.add_parser("judge", help="score records with the LLM judge baseline")
    command.add_argument("dataset")
    command.add_argument("-o", "--out", default="judge_predictions.jsonl")
    command.add_argument("--exemplars", help="dataset with one correct and one incorrect record")

    command = sub.add_parser("pipeline", help="run generate through evaluate")
    command.add_argument("seed_dataset")

    return parser


def _apply_overrides(cfg: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.folds is not None:
        cfg.folds = args.folds
    if args.mode is not None:
        cfg.feature_mode = args.mode
    if args.workdir is not None:
        cfg.workdir = args.workdir
    if args.client_type is not None:
        cfg.client.type = args.client_type
    if args.mock_script is not None:
        cfg.client.script = args.mock_script
        cfg.client.type = "mock"
    if args.record_script is not None:
        cfg.client.record_script = args.record_script
    if args.annotations is not None:
        cfg.annotations = args.annotations
    if args.drop_list is not None:
        cfg.drop_list = args.drop_list
    return cfg.validate()


def _plan(args: argparse.Namespace, cfg: PipelineConfig) -> list[str]:
    if args.command == "pipeline":
        paths = stages.pipeline_paths(cfg.workdir)
        plan = [
            f"generate: {args.seed_dataset} -> {paths['candidates']}",
            f"filter: {paths['candidates']} -> {paths['filtered']} (+{paths['filter_report']})",
            f"mct: {paths['filtered']} -> {paths['dataset']}",
            f"reverse: {paths['dataset']} -> {paths['cases']}",
            f"features: {paths['cases']} -> {paths['features']}",
        ]
        if cfg.annotations:
            plan.append(
                f"evaluate: {paths['cases']} -> {paths['cv_report']} (+{paths['cv_summary']})"
            )
        else:
            plan.append("evaluate: skipped (no annotations configured)")
        return plan
    source = getattr(
        args, "seed_dataset", getattr(args, "cases", getattr(args, "dataset", None))
    )
    source = source or getattr(args, "candidates", None) or getattr(args, "questions", None)
    target = getattr(args, "out", getattr(args, "report", "stdout"))
    return [f"{args.command}: {source} -> {target}"]


def _run(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    client = stages.build_client(cfg) if args.command in _NEEDS_CLIENT else None
    executor = stages.build_executor(cfg)
    try:
        if args.command == "generate":
            stages.run_generate(cfg, args.seed_dataset, args.out, client, executor)
        elif args.command == "filter":
            stages.run_filter(cfg, args.candidates, args.out, args.report)
        elif args.command == "mct":
            stages.run_mct(cfg, args.questions, args.out, client, executor)
        elif args.command == "reverse":
            stages.run_reverse(cfg, args.dataset, args.out, client, executor)
        elif args.command == "features":
            stages.run_features(cfg, args.cases, args.out)
        elif args.command == "train":
            stages.run_train(cfg, args.cases, args.out, algorithm=args.algorithm)
        elif args.command == "evaluate":
            stages.run_evaluate(cfg, args.cases, args.report, args.summary)
        elif args.command == "ablate":
            stages.run_ablate(cfg, args.cases, args.report, args.table)
        elif args.command == "judge":
            stages.run_judge(cfg, args.dataset, args.exemplars, args.out, client)
        elif args.command == "pipeline":
            stages.run_pipeline(cfg, args.seed_dataset, cfg.workdir, client, executor)
        else:  # pragma: no cover - argparse rejects unknown commands first
            raise TrajcheckError(f"unknown command {args.command!r}")
    finally:
        if client is not None:
            stages.finalize_client(cfg, client)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig().validate()
        cfg = _apply_overrides(cfg, args)
        if args.command == "pipeline":
            Path(cfg.workdir).mkdir(parents=True, exist_ok=True)
        if args.dry_run:
            for line in _plan(args, cfg):
                print(line)
            return 0
        return _run(args, cfg)
    except (TrajcheckError, OSError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
