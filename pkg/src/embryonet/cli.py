"""Command-line entry point chaining the pipeline stages.

Every stage reads from and writes to a working directory given by ``--out``::

    embryonet synth        --out run/            # run/dataset/
    embryonet pretrain     --out run/            # run/autoencoder.ckpt
    embryonet train-grader --out run/            # run/grade.ckpt
    embryonet finetune     --out run/            # run/binary.ckpt
    embryonet evaluate     --out run/            # run/report.json
    embryonet report       --out run/            # run/report/{report.json,*.csv,figure.svg}
    embryonet run-all      --out run/            # all of the above
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import EmbryoNetError, StageError
from .experiment import finetune, pretrain_autoencoder, run_experiment, stage, train_grader, embed_records
from .report import emit_report, load_report, report_json
from .storage import load_checkpoint, load_dataset, save_checkpoint, save_dataset
from .synthdata import generate_dataset
from .utils import derive_seed

log = logging.getLogger("embryonet")


def _paths(args) -> dict[str, Path]:
    out = Path(args.out)
    return {
        "data": Path(args.data) if args.data else out / "dataset",
        "autoencoder": Path(args.autoencoder) if args.autoencoder else out / "autoencoder.ckpt",
        "grader": Path(args.grader) if args.grader else out / "grade.ckpt",
        "binary": out / "binary.ckpt",
        "report": Path(args.report) if args.report else out / "report.json",
        "report_dir": out / "report",
    }


def cmd_synth(args, config: ExperimentConfig, seed: int, paths) -> None:
    with stage("synth"):
        dataset = generate_dataset(config.synthetic(seed))
        save_dataset(dataset, paths["data"])
    log.info("wrote %d embryos to %s", len(dataset), paths["data"])


def cmd_pretrain(args, config, seed, paths) -> None:
    with stage("pretrain"):
        dataset = load_dataset(paths["data"])
        model, history = pretrain_autoencoder(dataset, config, seed)
        save_checkpoint(model, paths["autoencoder"])
    log.info("autoencoder loss %s -> %s", history[:1], history[-1:])


def cmd_train_grader(args, config, seed, paths) -> None:
    with stage("train-grader"):
        dataset = load_dataset(paths["data"])
        ae = load_checkpoint(paths["autoencoder"])
        model = train_grader(dataset.graded, embed_records(ae, dataset.graded), config,
                             derive_seed(seed, "grade", "all"))
        save_checkpoint(model, paths["grader"])


def cmd_finetune(args, config, seed, paths) -> None:
    with stage("finetune"):
        dataset = load_dataset(paths["data"])
        ae = load_checkpoint(paths["autoencoder"])
        grader = load_checkpoint(paths["grader"])
        model = finetune(grader, dataset.kid, embed_records(ae, dataset.kid), config,
                         derive_seed(seed, "binary", "all"))
        save_checkpoint(model, paths["binary"])


def cmd_evaluate(args, config, seed, paths) -> None:
    ae = None
    if paths["autoencoder"].exists():
        with stage("load-autoencoder"):
            ae = load_checkpoint(paths["autoencoder"])
    report = run_experiment(paths["data"], config, seed, autoencoder=ae)
    with stage("evaluate"):
        paths["report"].parent.mkdir(parents=True, exist_ok=True)
        paths["report"].write_text(report_json(report), encoding="utf-8")
    pooled = report.pooled["model"]
    print(json.dumps({"pooled_auc": pooled["auc"], "bootstrap": pooled["bootstrap"]}))


def cmd_report(args, config, seed, paths) -> None:
    with stage("report"):
        report = load_report(paths["report"])
        for path in emit_report(report, paths["report_dir"]):
            log.info("wrote %s", path)


def cmd_run_all(args, config, seed, paths) -> None:
    for fn in (cmd_synth, cmd_pretrain, cmd_train_grader, cmd_finetune, cmd_evaluate, cmd_report):
        fn(args, config, seed, paths)


COMMANDS = {
    "synth": cmd_synth,
    "pretrain": cmd_pretrain,
    "train-grader": cmd_train_grader,
    "finetune": cmd_finetune,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "run-all": cmd_run_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embryonet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", required=True, help="working directory")
        p.add_argument("--data", help="dataset directory (default: <out>/dataset)")
        p.add_argument("--autoencoder", help="autoencoder checkpoint (default: <out>/autoencoder.ckpt)")
        p.add_argument("--grader", help="grade-model checkpoint (default: <out>/grade.ckpt)")
        p.add_argument("--report", help="report JSON (default: <out>/report.json)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with stage("config"):
            config = load_config(args.config) if args.config else ExperimentConfig()
        seed = config.seed if args.seed is None else args.seed
        COMMANDS[args.command](args, config, seed, _paths(args))
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EmbryoNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
