"""
metakit — command-line entry point.

Subcommands:
  train-sinusoid   meta-train an MLP on a toy regression problem
  train-fewshot    meta-train an MLP on N-way k-shot tasks from an image tree
  eval             adapt a checkpoint on held-out tasks and report query metrics
  inspect-dataset  split sizes and task counts of a manifest
  gen-synthetic    render the procedural glyph corpus

Every subcommand prints a JSON summary on stdout. Toolkit and validation
errors are logged and turn into exit status 2.

Run with: metakit train-sinusoid --shots 5 --outer-steps 2000 --report out.csv
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

from pydantic import ValidationError

from metakit import __version__
from metakit.config import (
    CLASSIFICATION_ACTIVATION,
    DEFAULT_SEED,
    EVAL_TASKS,
    HIDDEN_SIZES,
    INNER_LR,
    INNER_STEPS,
    LOG_EVERY,
    META_BATCH_SIZE,
    NUM_WORKERS,
    OUTER_LR,
    OUTER_STEPS,
    REGRESSION_ACTIVATION,
)
from metakit.core.errors import ConfigurationError, MetaKitError
from metakit.core.logging import get_logger
from metakit.data.combinatorics import count_combinations
from metakit.data.helpers import fewshot, toy
from metakit.data.manifest import read_manifest
from metakit.data.models import MetaSplit
from metakit.data.splitter import SplitMetaDataset
from metakit.data.synthetic import generate_synthetic_corpus
from metakit.data.toy import ToyProblem
from metakit.data.transforms import rotations
from metakit.nn.checkpoint import load_params, save_params
from metakit.nn.modules import MetaModule, build_mlp, mlp_from_params
from metakit.training.maml import MamlTrainer
from metakit.training.models import MamlConfig, TrainReport
from metakit.training.performance import PerformanceMonitor
from metakit.training.report import write_report_csv, write_summary_json

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2


# ------------------------------------------------------------------
# Argument parsing
# ------------------------------------------------------------------


def _add_maml_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--shots", type=int, default=5, help="support examples per class / task")
    parser.add_argument("--test-shots", type=int, default=None, help="query examples (default: --shots)")
    parser.add_argument("--inner-lr", type=float, default=INNER_LR)
    parser.add_argument("--inner-steps", type=int, default=INNER_STEPS)
    parser.add_argument("--eval-tasks", type=int, default=EVAL_TASKS)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--first-order", action="store_true")
    parser.add_argument("--workers", type=int, default=NUM_WORKERS, help="threads for per-task work")


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    _add_maml_flags(parser)
    parser.add_argument("--outer-lr", type=float, default=OUTER_LR)
    parser.add_argument("--meta-batch", type=int, default=META_BATCH_SIZE)
    parser.add_argument("--outer-steps", type=int, default=OUTER_STEPS)
    parser.add_argument("--log-every", type=int, default=LOG_EVERY)
    parser.add_argument(
        "--hidden", type=int, nargs="*", default=list(HIDDEN_SIZES), help="hidden layer sizes"
    )
    parser.add_argument("--report", type=Path, default=None, help="per-step CSV report")
    parser.add_argument("--checkpoint", type=Path, default=None, help="write trained parameters")
    parser.add_argument("--summary", type=Path, default=None, help="write the JSON run summary")
    parser.add_argument("--no-baseline", action="store_true", help="skip the pre-training evaluation")


def _add_toy_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--problem",
        choices=[p.value for p in ToyProblem],
        default=ToyProblem.SINUSOID.value,
    )
    parser.add_argument("--noise-std", type=float, default=None)
    parser.add_argument("--num-tasks", type=int, default=1_000_000)


def _add_fewshot_flags(parser: argparse.ArgumentParser, required: bool) -> None:
    parser.add_argument("--data", type=Path, required=required, help="dataset root")
    parser.add_argument("--manifest", type=Path, default=None, help="default: <data>/manifest.json")
    parser.add_argument("--ways", type=int, default=5)
    parser.add_argument("--image-size", type=int, default=None, help="nearest-neighbour resize")
    parser.add_argument("--channels", type=int, default=None, help="replicate grayscale channels")
    parser.add_argument(
        "--rotations", action="store_true", help="add 90/180/270-degree rotated classes"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metakit", description="Meta-learning toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-sinusoid", help="meta-train on a toy regression problem")
    _add_training_flags(p)
    _add_toy_flags(p)

    p = sub.add_parser("train-fewshot", help="meta-train on N-way k-shot image tasks")
    _add_training_flags(p)
    _add_fewshot_flags(p, required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint on held-out tasks")
    _add_maml_flags(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--meta-split", choices=["val", "test"], default="test")
    _add_toy_flags(p)
    _add_fewshot_flags(p, required=False)

    p = sub.add_parser("inspect-dataset", help="split sizes and C(n, N) task counts")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--ways", type=int, default=5)

    p = sub.add_parser("gen-synthetic", help="render the procedural glyph corpus")
    p.add_argument("--classes", type=int, default=100)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--size", type=int, default=28)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", type=Path, required=True)
    return parser


# ------------------------------------------------------------------
# Dataset construction
# ------------------------------------------------------------------


def _config(args: argparse.Namespace, **overrides) -> MamlConfig:
    return MamlConfig(
        inner_lr=args.inner_lr,
        inner_steps=args.inner_steps,
        first_order=args.first_order,
        eval_tasks=args.eval_tasks,
        seed=args.seed,
        num_workers=args.workers,
        **overrides,
    )


def _training_config(args: argparse.Namespace) -> MamlConfig:
    return _config(
        args,
        outer_lr=args.outer_lr,
        meta_batch_size=args.meta_batch,
        total_outer_steps=args.outer_steps,
        log_every=args.log_every,
    )


def _toy_split(args: argparse.Namespace, split: MetaSplit) -> SplitMetaDataset:
    return toy(
        args.problem,
        args.shots,
        args.test_shots,
        meta_split=split,
        num_tasks=args.num_tasks,
        noise_std=args.noise_std,
        seed=args.seed,
    )


def _fewshot_split(args: argparse.Namespace, split: MetaSplit) -> SplitMetaDataset:
    manifest = read_manifest(args.manifest or args.data)
    return fewshot(
        args.data,
        args.ways,
        args.shots,
        args.test_shots,
        meta_split=split,
        manifest=manifest,
        class_augmentations=rotations(90, 180, 270) if args.rotations else (),
        image_size=args.image_size,
        channels=args.channels,
        seed=args.seed,
    )


def _input_features(dataset: SplitMetaDataset) -> int:
    inputs, _ = dataset.get_task(0).train_arrays()
    return math.prod(inputs.shape[1:])


# ------------------------------------------------------------------
# Commands
# ------------------------------------------------------------------


def _train(
    args: argparse.Namespace,
    train_ds: SplitMetaDataset,
    eval_ds: SplitMetaDataset,
    module: MetaModule,
) -> dict:
    monitor = PerformanceMonitor()
    trainer = MamlTrainer(_training_config(args))
    baseline = None if args.no_baseline else trainer.evaluate(eval_ds, module)
    module, report = trainer.meta_train(train_ds, module, eval_ds)
    report = report.model_copy(update={"baseline": baseline})
    _write_outputs(args, report, module)
    return {
        "command": args.command,
        "report": report.model_dump(mode="json", exclude={"records"}),
        "steps": len(report.records),
        "performance": monitor.snapshot(args.command).model_dump(),
    }


def _write_outputs(args: argparse.Namespace, report: TrainReport, module: MetaModule) -> None:
    if args.report is not None:
        write_report_csv(report, args.report)
    if args.checkpoint is not None:
        save_params(module.named_parameters(), args.checkpoint)
    if args.summary is not None:
        write_summary_json(report, args.summary)


def cmd_train_sinusoid(args: argparse.Namespace) -> dict:
    train_ds = _toy_split(args, MetaSplit.TRAIN)
    eval_ds = _toy_split(args, MetaSplit.TEST)
    module = build_mlp([1, *args.hidden, 1], REGRESSION_ACTIVATION, seed=args.seed)
    return _train(args, train_ds, eval_ds, module)


def cmd_train_fewshot(args: argparse.Namespace) -> dict:
    train_ds = _fewshot_split(args, MetaSplit.TRAIN)
    eval_ds = _fewshot_split(args, MetaSplit.TEST)
    sizes = [_input_features(train_ds), *args.hidden, args.ways]
    module = build_mlp(sizes, CLASSIFICATION_ACTIVATION, seed=args.seed)
    return _train(args, train_ds, eval_ds, module)


def cmd_eval(args: argparse.Namespace) -> dict:
    monitor = PerformanceMonitor()
    split = MetaSplit(args.meta_split)
    if args.data is not None:
        dataset = _fewshot_split(args, split)
        activation = CLASSIFICATION_ACTIVATION
    else:
        dataset = _toy_split(args, split)
        activation = REGRESSION_ACTIVATION
    module = mlp_from_params(load_params(args.checkpoint), activation)
    summary = MamlTrainer(_config(args)).evaluate(dataset, module)
    return {
        "command": args.command,
        "checkpoint": str(args.checkpoint),
        "evaluation": summary.model_dump(mode="json"),
        "performance": monitor.snapshot(args.command).model_dump(),
    }


def cmd_inspect_dataset(args: argparse.Namespace) -> dict:
    manifest = read_manifest(args.manifest or args.data)
    splits = {}
    for split in MetaSplit:
        entries = manifest.split_classes(split)
        splits[split.value] = {
            "classes": len(entries),
            "examples": sum(len(entry.files) for entry in entries),
            "tasks": count_combinations(len(entries), args.ways),
        }
    return {
        "command": args.command,
        "name": manifest.name,
        "image_shape": list(manifest.image_shape),
        "ways": args.ways,
        "splits": splits,
    }


def cmd_gen_synthetic(args: argparse.Namespace) -> dict:
    root, manifest = generate_synthetic_corpus(
        args.out, args.classes, args.per_class, args.size, args.seed
    )
    return {
        "command": args.command,
        "root": str(root),
        "classes": len(manifest.classes),
        "images": sum(len(entry.files) for entry in manifest.classes),
        "splits": {split.value: len(names) for split, names in manifest.splits.items()},
    }


COMMANDS = {
    "train-sinusoid": cmd_train_sinusoid,
    "train-fewshot": cmd_train_fewshot,
    "eval": cmd_eval,
    "inspect-dataset": cmd_inspect_dataset,
    "gen-synthetic": cmd_gen_synthetic,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "test_shots", None) is not None and args.test_shots < 1:
            raise ConfigurationError(f"--test-shots must be positive, got {args.test_shots}")
        result = COMMANDS[args.command](args)
    except (MetaKitError, ValidationError) as e:
        logger.error("%s failed: %s", args.command, e)
        return EXIT_USAGE
    print(json.dumps(result, indent=2, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
