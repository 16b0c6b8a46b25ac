"""
Command-Line Interface

    jointcast gen-data|train|predict|baseline|eval|ensemble|check-invariance|gradcheck
              [--config PATH] [--seed N] [--out PATH] ...

Exit codes: 0 on success, 2 on validation failures (bad config, scene or
prediction files, checkpoint mismatch), 3 on numeric failures (diverged
training, failed invariance audit or gradient check).
"""

from __future__ import annotations

import argparse
import sys
from typing import Any, Optional, Sequence

from harness import commands
from jointcast_core.config import RunConfig, load_run_config
from jointcast_core.errors import JointcastError
from jointcast_core.logging import get_component_logger, setup_logging

logger = get_component_logger("harness.cli")

EXIT_OK = 0
EXIT_VALIDATION = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointcast", description="Joint multi-agent trajectory forecasting"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (defaults: JOINTCAST_CONFIG_FILE)")
    common.add_argument("--seed", type=int, help="Override the run seed")
    common.add_argument("--out", help="Output file or directory")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--log-json", action="store_true", default=None, help="JSON log lines")

    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", parents=[common], help="Write synthetic scene files")
    gen.add_argument("--num-train", type=int, dest="num_train")
    gen.add_argument("--num-val", type=int, dest="num_val")

    train = sub.add_parser("train", parents=[common], help="Train and checkpoint a model")
    train.add_argument("--scenes", help="Training scene file (default: train_path)")
    train.add_argument("--epochs", type=int)

    predict = sub.add_parser("predict", parents=[common], help="Write a prediction file")
    predict.add_argument("--checkpoint", required=True)
    predict.add_argument("--scenes", required=True)

    baseline = sub.add_parser(
        "baseline", parents=[common], help="Write constant-velocity predictions"
    )
    baseline.add_argument("--scenes", required=True)

    evaluate = sub.add_parser("eval", parents=[common], help="Write a metric report CSV")
    evaluate.add_argument("--predictions", required=True)
    evaluate.add_argument("--scenes", required=True)

    ensemble = sub.add_parser("ensemble", parents=[common], help="Merge prediction files")
    ensemble.add_argument("predictions", nargs="+")
    ensemble.add_argument("--weights", type=float, nargs="+")

    audit = sub.add_parser(
        "check-invariance", parents=[common], help="Audit rigid, time and permutation symmetry"
    )
    audit.add_argument("--checkpoint", required=True)
    audit.add_argument("--scenes", required=True)
    audit.add_argument("--trials", type=int, default=1)

    grad = sub.add_parser("gradcheck", parents=[common], help="Finite-difference loss check")
    grad.add_argument("--max-coords", type=int, default=3, dest="max_coords")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    keys = ("seed", "num_train", "num_val", "epochs")
    return {key: getattr(args, key, None) for key in keys}


def run_command(args: argparse.Namespace, cfg: RunConfig) -> None:
    if args.command == "gen-data":
        commands.cmd_gen_data(cfg, args.out)
    elif args.command == "train":
        result = commands.cmd_train(cfg, args.scenes, args.out)
        logger.info(f"Latest checkpoint: {result.latest_checkpoint}")
    elif args.command == "predict":
        commands.cmd_predict(cfg, args.checkpoint, args.scenes, args.out or "predictions.jsonl")
    elif args.command == "baseline":
        commands.cmd_baseline(cfg, args.scenes, args.out or "baseline.jsonl")
    elif args.command == "eval":
        report = commands.cmd_eval(cfg, args.predictions, args.scenes, args.out or "metrics.csv")
        for name, value in report.aggregate.items():
            logger.info(f"{name}: {value:.6g}")
    elif args.command == "ensemble":
        commands.cmd_ensemble(cfg, args.predictions, args.out or "ensemble.jsonl", args.weights)
    elif args.command == "check-invariance":
        commands.cmd_check_invariance(cfg, args.checkpoint, args.scenes, args.trials, args.out)
    elif args.command == "gradcheck":
        commands.cmd_gradcheck(cfg, args.max_coords)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level, json_format=args.log_json)
    try:
        cfg = load_run_config(args.config, _overrides(args))
        run_command(args, cfg)
    except JointcastError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
