"""
Command line entry point.

``divens [--seed N] [--config FILE] [--out DIR] [--quiet] <command> [options]``

Result files are written under the output directory; progress goes to the
log on stderr and failures to stderr as a single JSON line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd

from divens.attacks.config import ATTACK_METHODS, AttackConfig
from divens.attacks.registry import run_attack
from divens.dataio.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from divens.dataio.config import ExperimentConfig, load_desk_dataset
from divens.dataio.dataset import Dataset
from divens.diversity.theory import run_theory_suite
from divens.errors import DivensError, NumericError, TheoryCheckError, UsageError
from divens.evaluation.accuracy import accuracy_report, robust_accuracy_report
from divens.evaluation.detection import detection_scores, roc_auc
from divens.evaluation.histogram import diversity_histogram
from divens.evaluation.transfer import transfer_matrix
from divens.logs import configure_logging
from divens.models.ensemble import Ensemble
from divens.training.trainer import adp_train

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message, prog=self.prog)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="divens", description="Diversity-promoting ensembles under attack.")
    parser.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    parser.add_argument("--config", type=Path, default=None, help="JSON experiment file")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--quiet", action="store_true", help="log warnings only")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    commands.add_parser("train", help="train an ensemble and save a checkpoint")

    attack = commands.add_parser("attack", help="craft adversarial examples")
    _checkpoint_option(attack)
    attack.add_argument("--method", choices=ATTACK_METHODS, default="pgd")
    attack.add_argument("--eps", type=float, default=None)
    attack.add_argument("--steps", type=int, default=None)
    attack.add_argument("--c", dest="cw_c", type=float, default=None)
    attack.add_argument("--kappa", dest="cw_kappa", type=float, default=None)
    attack.add_argument("--gamma", dest="jsma_gamma", type=float, default=None)
    attack.add_argument("--targeted", action="store_true")
    attack.add_argument("--victim", type=int, default=None, help="member index (default: ensemble)")
    attack.add_argument("--limit", type=int, default=None)

    evaluate = commands.add_parser("eval", help="clean and robust accuracy for the configured attacks")
    _checkpoint_option(evaluate)

    transfer = commands.add_parser("transfer", help="member-to-member transfer matrices")
    _checkpoint_option(transfer)
    transfer.add_argument("--method", choices=ATTACK_METHODS, default=None)
    transfer.add_argument("--eps", type=float, default=None)

    detect = commands.add_parser("detect", help="diversity-based detection with ROC")
    _checkpoint_option(detect)
    detect.add_argument("--method", choices=ATTACK_METHODS, default=None)
    detect.add_argument("--eps", type=float, default=None)
    detect.add_argument("--limit", type=int, default=None)

    theory = commands.add_parser("theory", help="check the prediction-space optima")
    theory.add_argument("--steps", type=int, default=20_000)
    theory.add_argument("--runs", type=int, default=5)

    hist = commands.add_parser("hist", help="histogram of ln ED over the test set")
    _checkpoint_option(hist)
    hist.add_argument("--bins", type=int, default=None)
    return parser


def _checkpoint_option(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--checkpoint", type=Path, default=None, help="default: <out>/checkpoint.json"
    )


# ---------- shared plumbing ----------
def _experiment(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, output_dir=str(args.out))
    return config


def _out_dir(config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _restore(args: argparse.Namespace, config: ExperimentConfig) -> Checkpoint:
    path = args.checkpoint or Path(config.output_dir) / "checkpoint.json"
    if not path.exists():
        raise UsageError(f"checkpoint {path} not found; run 'divens train' first", path=str(path))
    return load_checkpoint(path)


def _test_set(config: ExperimentConfig, ckpt: Checkpoint, limit: Optional[int]) -> Dataset:
    # the training seed fixes the synthetic train/test split
    _, test = load_desk_dataset(config.dataset, ckpt.seed)
    return test if limit is None else test.head(limit)


def _write_csv(frame: pd.DataFrame, path: Path, *, index: bool = False) -> None:
    frame.to_csv(path, index=index)
    logger.info("wrote %s", path)


def _write_json(doc: Any, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)


def _accuracy_row(name: str, eps: Optional[float], victim: str, report, ens: Ensemble) -> dict:
    row: dict[str, Any] = {"attack": name, "eps": eps, "victim": victim, "ensemble": report.ensemble}
    for k in range(ens.size):
        row[f"member{k}"] = report.members[k]
    return row


# ---------- commands ----------
def cmd_train(args: argparse.Namespace, config: ExperimentConfig) -> None:
    train, test = load_desk_dataset(config.dataset, config.seed)
    mlp = config.model.mlp_config(train.input_dim, train.num_classes)
    ens = Ensemble.initialize(mlp, config.ensemble_size, config.seed)
    ens, report = adp_train(ens, train, config.train)
    logger.info("test accuracy %.4f on %d examples", accuracy_report(ens, test).ensemble, len(test))

    out = _out_dir(config)
    save_checkpoint(out / "checkpoint.json", ens, config.train.adp, config.seed, report)
    _write_json(report.to_dict(), out / "train_report.json")
    _write_json(config.to_dict(), out / "config_resolved.json")


def cmd_attack(args: argparse.Namespace, config: ExperimentConfig) -> None:
    ckpt = _restore(args, config)
    test = _test_set(config, ckpt, args.limit)
    options = {
        name: getattr(args, name)
        for name in ("eps", "steps", "cw_c", "cw_kappa", "jsma_gamma", "victim")
        if getattr(args, name) is not None
    }
    attack = AttackConfig(method=args.method, targeted=args.targeted, seed=config.seed, **options)
    batch = run_attack(
        ckpt.ensemble, test.features, test.labels, attack, indices=np.arange(len(test))
    )
    adversarial = accuracy_report(ckpt.ensemble, replace(test, features=batch.adversarials))

    out = _out_dir(config)
    _write_csv(batch.to_frame(), out / f"adv_{attack.method}.csv")
    summary = pd.DataFrame(
        [
            {
                "method": attack.method,
                "eps": attack.eps,
                "victim": attack.victim_name,
                "targeted": attack.targeted,
                "count": len(batch),
                "success_rate": batch.success_rate,
                "clean_accuracy": accuracy_report(ckpt.ensemble, test).ensemble,
                "adversarial_accuracy": adversarial.ensemble,
                "mean_l0": batch.mean_l0,
                "mean_l1": batch.mean_l1,
                "mean_l2": batch.mean_l2,
                "mean_linf": batch.mean_linf,
            }
        ]
    )
    _write_csv(summary, out / "attack_summary.csv")


def cmd_eval(args: argparse.Namespace, config: ExperimentConfig) -> None:
    ckpt = _restore(args, config)
    ens = ckpt.ensemble
    test = _test_set(config, ckpt, config.evaluation.limit)
    rows = [_accuracy_row("clean", None, "none", accuracy_report(ens, test), ens)]
    for attack in config.attacks:
        report = robust_accuracy_report(ens, test, attack)
        rows.append(_accuracy_row(attack.method, attack.eps, attack.victim_name, report, ens))
    _write_csv(pd.DataFrame(rows), _out_dir(config) / "eval.csv")


def cmd_transfer(args: argparse.Namespace, config: ExperimentConfig) -> None:
    ckpt = _restore(args, config)
    settings = config.evaluation
    test = _test_set(config, ckpt, settings.transfer_limit)
    attack = AttackConfig(
        method=args.method or settings.transfer_method,
        eps=settings.transfer_eps if args.eps is None else args.eps,
        seed=config.seed,
    )
    out = _out_dir(config)
    untargeted = transfer_matrix(ckpt.ensemble, test, attack, "untargeted_accuracy")
    _write_csv(untargeted.to_frame(), out / "transfer_untargeted.csv", index=True)
    targeted = transfer_matrix(ckpt.ensemble, test, attack, "targeted_success_rate")
    _write_csv(targeted.to_frame(), out / "transfer_targeted.csv", index=True)


def cmd_detect(args: argparse.Namespace, config: ExperimentConfig) -> None:
    ckpt = _restore(args, config)
    ens = ckpt.ensemble
    settings = config.evaluation
    test = _test_set(config, ckpt, settings.detect_limit if args.limit is None else args.limit)
    attack = AttackConfig(
        method=args.method or settings.detect_method,
        eps=settings.detect_eps if args.eps is None else args.eps,
        seed=config.seed,
    )
    batch = run_attack(ens, test.features, test.labels, attack, indices=np.arange(len(test)))
    offset = ckpt.adp.det_offset
    clean = detection_scores(ens, test.features, offset)
    adv = detection_scores(ens, batch.adversarials, offset)
    roc = roc_auc(clean, adv)

    out = _out_dir(config)
    scores = pd.DataFrame(
        {
            "index": np.concatenate((np.arange(len(test)), np.arange(len(test)))),
            "kind": ["clean"] * len(test) + ["adversarial"] * len(test),
            "label": np.concatenate((test.labels, test.labels)),
            "score": np.concatenate((clean, adv)),
        }
    )
    _write_csv(scores, out / "detect_scores.csv")
    _write_csv(roc.to_frame(), out / "roc.csv")
    _write_json(
        {
            "method": attack.method,
            "eps": attack.eps,
            "count": len(test),
            "success_rate": batch.success_rate,
            "clean_median": float(np.median(clean)),
            "adversarial_median": float(np.median(adv)),
            "auc": roc.auc,
        },
        out / "detect_summary.json",
    )
    logger.info("detection AUC %.4f", roc.auc)


def cmd_theory(args: argparse.Namespace, config: ExperimentConfig) -> None:
    if args.steps < 1 or args.runs < 1:
        raise UsageError("'--steps' and '--runs' must be positive")
    checks = run_theory_suite(seed=config.seed, steps=args.steps, runs=args.runs)
    table = pd.DataFrame([check.to_dict() for check in checks])
    _write_csv(table, _out_dir(config) / "theory.csv")
    print(table.to_string(index=False))
    failed = [check.name for check in checks if not check.passed]
    if failed:
        raise TheoryCheckError(f"theory checks failed: {', '.join(failed)}", failed=failed)


def cmd_hist(args: argparse.Namespace, config: ExperimentConfig) -> None:
    ckpt = _restore(args, config)
    test = _test_set(config, ckpt, config.evaluation.limit)
    bins = config.evaluation.hist_bins if args.bins is None else args.bins
    histogram = diversity_histogram(ckpt.ensemble, test, bins, ckpt.adp.det_offset)
    logger.info("median ln ED %.4f over %d examples", histogram.median, histogram.total)
    _write_csv(histogram.to_frame(), _out_dir(config) / "histogram.csv")


COMMANDS = {
    "train": cmd_train,
    "attack": cmd_attack,
    "eval": cmd_eval,
    "transfer": cmd_transfer,
    "detect": cmd_detect,
    "theory": cmd_theory,
    "hist": cmd_hist,
}


def _report(error: DivensError) -> int:
    print(error.to_record(), file=sys.stderr)
    return error.code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.quiet)
        config = _experiment(args)
        COMMANDS[args.command](args, config)
    except DivensError as exc:
        return _report(exc)
    except ValueError as exc:
        return _report(UsageError(str(exc)))
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _report(NumericError(f"{type(exc).__name__}: {exc}"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
