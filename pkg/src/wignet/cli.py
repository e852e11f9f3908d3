"""Command-line experiment driver.

Subcommands: generate, train, evaluate, compare, robustness, curves, ingest.
Each run writes its artifacts plus a manifest JSON recording the exact
configuration into the output directory. Exit codes: 0 success, 1 validation
error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .harness import (
    CorpusConfig,
    ExperimentConfig,
    cmd_compare,
    cmd_curves,
    cmd_evaluate,
    cmd_generate,
    cmd_ingest,
    cmd_robustness,
    cmd_train,
    make_experimental_analog,
)
from .mlp import load_model
from .sampling import QuadratureBatch

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; the contract wants 1.
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="wignet", description=__doc__)
    parser.add_argument("--config", help="JSON experiment configuration file")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out-dir", default=".", help="directory for output files")
    parser.add_argument("--workers", type=int, help="process pool size override")
    parser.add_argument("--run-id", help="token used in output file names (default: timestamp)")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="generate a labeled corpus")
    generate.add_argument("--modes", type=int, help="mode count override")
    generate.add_argument("--states", type=int, help="corpus size override")
    generate.add_argument("--reps", type=int, help="repetitions per phase slot override")

    train_cmd = commands.add_parser("train", help="train the classifier on a dataset file")
    train_cmd.add_argument("--dataset", required=True)

    evaluate = commands.add_parser("evaluate", help="confusion metrics of a saved model")
    evaluate.add_argument("--model", required=True)
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--split", default="val", choices=["train", "val"])

    compare = commands.add_parser("compare", help="network vs tomography across data budgets")
    compare.add_argument("--model", required=True)

    robustness = commands.add_parser("robustness", help="injected-loss consensus study")
    robustness.add_argument("--base", help="base quadrature batch CSV")
    robustness.add_argument(
        "--simulate-analog",
        action="store_true",
        help="generate the simulated experimental stand-in as the base batch",
    )

    curves = commands.add_parser("curves", help="ROC and precision-recall CSVs")
    curves.add_argument("--model", required=True)
    curves.add_argument("--dataset", required=True)

    ingest = commands.add_parser("ingest", help="convert external quadratures to the batch schema")
    ingest.add_argument("--input", required=True)
    ingest.add_argument("--mode-column", default="mode")
    ingest.add_argument("--phase-column", default="phase")
    ingest.add_argument("--value-column", default="value")
    ingest.add_argument("--state-id", default="ingested")
    return parser


def _load_config(args) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_json_file(args.config)
    else:
        config = ExperimentConfig(corpus=CorpusConfig(mode_count=3))
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    return config


def _write_manifest(out_dir: str, run_id: str, command: str, config: ExperimentConfig, outputs: dict) -> str:
    manifest = {
        "command": command,
        "run_id": run_id,
        "argv": sys.argv[1:],
        "config": config.to_json_dict(),
        "outputs": outputs,
    }
    path = os.path.join(out_dir, f"{command}_{run_id}.manifest.json")
    with open(path, "w") as handle:
        json.dump(manifest, handle, indent=2)
    return path


def _run(args) -> int:
    config = _load_config(args)
    run_id = args.run_id or time.strftime("%Y%m%d-%H%M%S")
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)

    def out(name: str) -> str:
        return os.path.join(out_dir, f"{args.command}_{run_id}_{name}")

    outputs: dict = {}
    if args.command == "generate":
        corpus = config.corpus
        overrides = {}
        if args.modes is not None:
            overrides["mode_count"] = args.modes
        if args.states is not None:
            overrides["n_states"] = args.states
        if args.reps is not None:
            overrides["reps"] = args.reps
        if overrides:
            corpus = replace(corpus, **overrides)
        dataset_path = out("dataset.csv")
        _, manifest = cmd_generate(corpus, config.master_seed, dataset_path, workers=config.workers)
        outputs = {"dataset": dataset_path, "counts": manifest}
    elif args.command == "train":
        model_path = out("model.json")
        history_path = out("history.csv")
        train_config = replace(config.train, seed=config.master_seed)
        cmd_train(args.dataset, train_config, model_path, history_path)
        outputs = {"model": model_path, "history": history_path}
    elif args.command == "evaluate":
        metrics = cmd_evaluate(args.model, args.dataset, config.train.threshold, args.split)
        metrics_path = out("metrics.json")
        with open(metrics_path, "w") as handle:
            json.dump(metrics, handle, indent=2)
        print(json.dumps(metrics, indent=2))
        outputs = {"metrics": metrics_path}
    elif args.command == "compare":
        model = load_model(args.model)
        result_path = out("comparison.csv")
        result = cmd_compare(
            config.corpus,
            config.comparison,
            model,
            config.master_seed,
            workers=config.workers,
            out_path=result_path,
        )
        outputs = {"comparison": result_path, "loglik_min_step": result.loglik_min_step}
    elif args.command == "robustness":
        if args.base:
            base = QuadratureBatch.from_csv(args.base)
        elif args.simulate_analog:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.master_seed, 0xA11A])))
            _, base = make_experimental_analog(rng)
            base_path = out("base_batch.csv")
            base.to_csv(base_path)
            outputs["base"] = base_path
        else:
            raise _UsageError("robustness needs --base FILE or --simulate-analog")
        report_path = out("robustness.json")
        cmd_robustness(
            config.robustness,
            base,
            config.master_seed,
            workers=config.workers,
            train_config=config.train,
            out_path=report_path,
        )
        outputs["report"] = report_path
    elif args.command == "curves":
        roc_path = out("roc.csv")
        pr_path = out("pr.csv")
        cmd_curves(args.model, args.dataset, roc_path, pr_path)
        outputs = {"roc": roc_path, "pr": pr_path}
    elif args.command == "ingest":
        batch_path = out("batch.csv")
        cmd_ingest(
            args.input,
            batch_path,
            mode_column=args.mode_column,
            phase_column=args.phase_column,
            value_column=args.value_column,
            state_id=args.state_id,
        )
        outputs = {"batch": batch_path}
    manifest_path = _write_manifest(out_dir, run_id, args.command, config, outputs)
    print(f"wrote {manifest_path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _run(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
