"""Command-line interface.

Three subcommands cover the experiment loop:

* ``evipar synth task.json out/`` - generate a dataset from a task spec;
* ``evipar train run.ini --out run/`` - train per config, writing a run
  manifest, an epoch log, and the final checkpoint;
* ``evipar eval run/model.ckpt data/`` - score a checkpoint on a split,
  writing metrics JSON, a prediction log, and a rejection curve.

Exit codes: 0 success, 2 configuration problems, 3 data problems, 4
training aborted on numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, NumericalAbort
from .evaluation import evaluate, region_attention_mass, summary_dict
from .evidential import write_prediction_log
from .featfile import load_dataset, save_dataset
from .model import AttributeModel, ModelConfig
from .raer import export_attention_csv
from .runconfig import RunConfig, parse_run_config
from .synth import generate_dataset, load_task_spec
from .trainer import Trainer

RUN_MANIFEST_NAME = "run_manifest.json"
CHECKPOINT_NAME = "model.ckpt"
EPOCH_LOG_NAME = "epochs.jsonl"

INIT_STREAM_KEY = 11


def model_init_rng(seed: int) -> np.random.Generator:
    """Weight-init stream, split from the run seed so it never collides
    with the shuffle stream."""
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed, spawn_key=(INIT_STREAM_KEY,))))


def cmd_synth(spec_path: str, out_dir: str) -> Path:
    spec = load_task_spec(spec_path)
    dataset = generate_dataset(spec)
    manifest = save_dataset(dataset, out_dir)
    counts = {name: len(split) for name, split in dataset.splits.items()}
    print(f"wrote {out_dir}: {counts['train']} train / {counts['val']} val / "
          f"{counts['test']} test samples, {spec.n_attrs} attributes")
    return manifest


def build_model(config: RunConfig, task) -> AttributeModel:
    model_cfg = ModelConfig.from_task(task, **config.model_overrides())
    return AttributeModel(model_cfg, model_init_rng(config.seed))


def cmd_train(config_path: str, out_dir: str,
              overrides: dict | None = None) -> Path:
    config = parse_run_config(config_path, overrides)
    if config.data_path is None:
        raise ConfigError("config has no [data] path to train on")
    dataset = load_dataset(config.data_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    manifest = {
        "tool": f"evipar {__version__}",
        "seed": config.seed,
        "config": config.to_dict(),
        "dataset": str(config.data_path),
        "artifacts": {"checkpoint": CHECKPOINT_NAME,
                      "epoch_log": EPOCH_LOG_NAME},
        "started_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    (out / RUN_MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    model = build_model(config, dataset.spec)
    checkpoint_path = out / CHECKPOINT_NAME
    log_path = out / EPOCH_LOG_NAME
    log_path.write_text("")

    total_epochs = config.values["curriculum"]["total_epochs"]
    if total_epochs == 0:
        model.save(checkpoint_path)
        print(f"no epochs requested; saved the initial weights to "
              f"{checkpoint_path}")
        return checkpoint_path

    trainer = Trainer(model, dataset, config.schedule(),
                      config.trainer_config(), seed=config.seed,
                      log_path=log_path)
    for epoch in range(1, total_epochs + 1):
        report = trainer.run_epoch(epoch)
        print(f"epoch {report.epoch:3d} stage {report.stage:>2} "
              f"loss {report.mean_loss:.4f} mA {report.train_ma:.3f} "
              f"vacuity {report.mean_vacuity:.3f}")
    model.save(checkpoint_path)
    print(f"saved checkpoint to {checkpoint_path}")
    return checkpoint_path


def _load_run_model(checkpoint_path: Path, task) -> AttributeModel:
    manifest_path = checkpoint_path.parent / RUN_MANIFEST_NAME
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as e:
        raise ConfigError(
            f"no run manifest next to the checkpoint ({manifest_path}); "
            f"cannot reconstruct the architecture: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"run manifest {manifest_path} is corrupt: {e}") from e
    model_section = manifest.get("config", {}).get("model", {})
    overrides = {k: v for k, v in model_section.items() if k != "seed"}
    model_cfg = ModelConfig.from_task(task, **overrides)
    model = AttributeModel(model_cfg, np.random.default_rng(0))
    model.load(checkpoint_path)
    return model


def cmd_eval(checkpoint: str, dataset_dir: str, split: str = "test",
             coverages=(0.5, 0.8, 1.0), out_dir: str | None = None,
             attmap: str | None = None) -> dict:
    checkpoint_path = Path(checkpoint)
    dataset = load_dataset(dataset_dir)
    if split not in dataset.splits:
        raise ConfigError(
            f"unknown split {split!r}; expected one of "
            f"{sorted(dataset.splits)}")
    model = _load_run_model(checkpoint_path, dataset.spec)
    result = evaluate(model, dataset, split=split)
    curve = result.curve(coverages)

    out = Path(out_dir) if out_dir is not None else checkpoint_path.parent
    out.mkdir(parents=True, exist_ok=True)
    summary = summary_dict(result)
    summary["rejection"] = {"coverages": list(curve.coverages),
                            "accuracies": list(curve.accuracies)}
    summary["attention_mass"] = region_attention_mass(result, dataset)
    metrics_path = out / "metrics.json"
    metrics_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    attr_names = [a.name for a in dataset.spec.attributes]
    write_prediction_log(out / "predictions.csv",
                         range(len(result.labels)), attr_names,
                         result.labels, result.p_hat, result.u,
                         result.eps_pos, result.eps_neg)
    curve.write_csv(out / "rejection.csv")

    if attmap is not None:
        if result.mean_attention is None:
            raise ConfigError("this model ran without the refinement pass; "
                              "there is no attention map to export")
        export_attention_csv(attmap, attr_names, result.mean_attention,
                             dataset.spec.grid)

    print(f"{split}: mA {summary['mA']:.4f} instance-F1 "
          f"{summary['instance_f1']:.4f} mean-vacuity "
          f"{summary['mean_vacuity']:.4f}")
    print(f"wrote {metrics_path}")
    return summary


def _train_overrides(args) -> dict:
    overrides = {}
    if args.no_spm:
        overrides[("model", "use_spm")] = False
    if args.no_raer:
        overrides[("model", "use_raer")] = False
    if args.no_cl:
        overrides[("curriculum", "use_cl")] = False
    if args.no_awr:
        overrides[("curriculum", "use_awr")] = False
    if args.no_edl:
        overrides[("curriculum", "use_edl")] = False
    if args.seed is not None:
        overrides[("model", "seed")] = args.seed
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evipar",
        description="Evidential multi-attribute recognition workbench")
    parser.add_argument("--version", action="version",
                        version=f"evipar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a dataset from a task spec")
    p_synth.add_argument("spec", help="task spec JSON")
    p_synth.add_argument("out", help="output dataset directory")

    p_train = sub.add_parser("train", help="train a model per run config")
    p_train.add_argument("config", help="run config file")
    p_train.add_argument("--out", default="run",
                         help="run output directory (default: ./run)")
    p_train.add_argument("--seed", type=int, default=None,
                         help="override the config's training seed")
    p_train.add_argument("--no-spm", action="store_true",
                         help="freeze the spatial prior mask at zero")
    p_train.add_argument("--no-raer", action="store_true",
                         help="bypass the refinement pass entirely")
    p_train.add_argument("--no-cl", action="store_true",
                         help="disable curriculum weighting in both stages")
    p_train.add_argument("--no-awr", action="store_true",
                         help="disable the wrong-way-evidence penalty")
    p_train.add_argument("--no-edl", action="store_true",
                         help="train on plain cross-entropy throughout")

    p_eval = sub.add_parser("eval", help="score a checkpoint on a split")
    p_eval.add_argument("checkpoint", help="checkpoint file from train")
    p_eval.add_argument("dataset", help="dataset directory from synth")
    p_eval.add_argument("--split", default="test",
                        choices=("train", "val", "test"))
    p_eval.add_argument("--reject", default="0.5,0.8,1.0",
                        help="comma-separated rejection coverages")
    p_eval.add_argument("--out", default=None,
                        help="report directory (default: checkpoint's)")
    p_eval.add_argument("--attmap", default=None,
                        help="also export the mean attention map CSV here")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            cmd_synth(args.spec, args.out)
        elif args.command == "train":
            cmd_train(args.config, args.out, _train_overrides(args))
        elif args.command == "eval":
            try:
                coverages = [float(c) for c in args.reject.split(",") if c]
            except ValueError:
                raise ConfigError(
                    f"--reject must be comma-separated numbers, got "
                    f"{args.reject!r}")
            cmd_eval(args.checkpoint, args.dataset, split=args.split,
                     coverages=coverages, out_dir=args.out,
                     attmap=args.attmap)
    except ConfigError as e:
        print(f"evipar: configuration error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"evipar: data error: {e}", file=sys.stderr)
        return 3
    except NumericalAbort as e:
        print(f"evipar: training aborted: {e}", file=sys.stderr)
        return 4
    except ValueError as e:
        # range violations raised by domain constructors are config errors
        print(f"evipar: configuration error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
