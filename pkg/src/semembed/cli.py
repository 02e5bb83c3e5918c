"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import io
from .embedding import DegenerateProjectionError
from .gradcheck import KINDS, REL_TOL, run_suite
from .inference import rank_dataset, zero_shot_eval
from .losses import LossConfig
from .metrics import PredictionRanking, evaluate_multi_label, evaluate_single_label
from .mining import mine_dataset, train_scorer
from .synthetic import SyntheticSpec, generate_synthetic
from .trainer import NumericalError, TrainConfig, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("semembed")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunConfig:
    """Everything a CLI run needs; built from flags, optionally seeded from a JSON file."""

    mode: str
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def validate(self) -> None:
        for name, p in self.paths.items():
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(f"{name} file not found: {p}")
        for name, p in self.outputs.items():
            if p is None:
                continue
            parent = Path(p).parent if name != "out_dir" else Path(p)
            parent.mkdir(parents=True, exist_ok=True)
            if not os.access(parent, os.W_OK):
                raise PermissionError(f"cannot write to {parent}")


def _kebab(name: str) -> str:
    return "--" + name.replace("_", "-")


_LOSS_FLAGS = {
    "margin_rank": float, "margin_disc": float, "lambda1": float, "lambda2": float,
    "lambda3": float, "weight_decay": float,
}
_TRAIN_FLAGS = {
    "learning_rate": float, "momentum": float, "lr_step_epochs": int, "lr_step_factor": float,
    "epochs": int, "pair_batch_size": int, "reference_batch_size": int, "rank_batch_size": int,
    "positive_fraction": float, "candidates_per_reference": int, "batches_per_epoch": int,
    "max_negatives": int, "rng_seed": int, "init_scale": float,
}


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("loss")
    for name, typ in _LOSS_FLAGS.items():
        g.add_argument(_kebab(name), type=typ, default=None)
    g.add_argument("--disc-mode", choices=("none", "contrastive", "triplet"), default=None)
    g.add_argument("--difference", dest="difference_enabled", action="store_true", default=None)
    g.add_argument("--no-rank", dest="rank_enabled", action="store_false", default=None)
    g = p.add_argument_group("training")
    for name, typ in _TRAIN_FLAGS.items():
        flag = "--seed" if name == "rng_seed" else _kebab(name)
        g.add_argument(flag, dest=name, type=typ, default=None)
    p.add_argument("--config", type=Path, default=None,
                   help="JSON file with loss/training fields; flags override it")


def _build_configs(args) -> tuple:
    base: dict = {}
    if args.config is not None:
        base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        base = {k.replace("-", "_"): v for k, v in base.items()}
    loss_fields = {f.name for f in dataclasses.fields(LossConfig)}
    train_fields = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(base) - loss_fields - train_fields
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for name in loss_fields | train_fields:
        v = getattr(args, name, None)
        if v is not None:
            base[name] = v
    loss = LossConfig(**{k: v for k, v in base.items() if k in loss_fields})
    tr = TrainConfig(**{k: v for k, v in base.items() if k in train_fields})
    return loss, tr


def _write_report(report, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    sys.stdout.write(report.to_text())


def cmd_gensynth(args) -> int:
    spec = SyntheticSpec(classes=args.classes, per_class=args.per_class,
                         feature_dim=args.feature_dim, embed_dim=args.embed_dim,
                         noise_sigma=args.noise, class_overlap=args.overlap, seed=args.seed)
    cfg = RunConfig("gensynth", outputs={"out_dir": args.out})
    cfg.validate()
    data = generate_synthetic(spec)
    out = Path(args.out)
    io.save_dataset(data.train, out / "train.tsv")
    io.save_dataset(data.test, out / "test.tsv")
    io.save_label_embeddings(data.labels, out / "labels.tsv")
    print(f"wrote {len(data.train)} train / {len(data.test)} test instances "
          f"and {len(data.labels)} labels to {out}")
    return EXIT_OK


def cmd_mine(args) -> int:
    RunConfig("mine", paths={"images": args.images}, outputs={"out": args.out}).validate()
    images = io.load_multilabel_images(args.images)
    scorer = train_scorer(images, epochs=args.epochs, lr=args.lr, seed=args.seed)
    mined = mine_dataset(images, scorer)
    io.save_dataset(mined, args.out)
    print(f"mined {len(mined)} instances from {len(images)} images")
    return EXIT_OK


def cmd_train(args) -> int:
    loss_cfg, train_cfg = _build_configs(args)
    run = RunConfig("train", loss_cfg, train_cfg,
                    paths={"instances": args.instances, "labels": args.labels,
                           "resume": args.resume},
                    outputs={"checkpoint": args.checkpoint, "log": args.log})
    run.validate()
    dataset = io.load_dataset(args.instances)
    labels = io.load_label_embeddings(args.labels)
    state = io.load_checkpoint(args.resume) if args.resume else None
    mode_line = f"mode: {loss_cfg.describe()}"
    print(mode_line)
    state = train(dataset, labels, loss_cfg, train_cfg, state=state, verbose=True)
    io.save_checkpoint(state, args.checkpoint)
    log_path = args.log or str(args.checkpoint) + ".log"
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write(f"# {mode_line}\n")
        for epoch, loss in state.loss_history:
            fh.write(f"epoch {epoch} loss {loss!r}\n")
    return EXIT_OK


def _ks(args):
    return tuple(args.hit_k)


def cmd_eval(args) -> int:
    RunConfig("eval", paths={"checkpoint": args.checkpoint, "test": args.test,
                             "labels": args.labels}, outputs={"out_dir": args.out}).validate()
    model = io.load_checkpoint(args.checkpoint).model
    labels = io.load_label_embeddings(args.labels)
    data = io.load_instances(args.test)
    if isinstance(data, list):
        from .embedding import Dataset, Instance
        unknown = sorted({lab for img in data for lab in img.labels} - set(labels.ids))
        if unknown:
            raise ValueError(f"labels missing from label table: {unknown}")
        whole = Dataset([Instance(img.id, img.image_features, img.labels[0]) for img in data])
        rankings = rank_dataset(model, whole, labels)
        report = evaluate_multi_label(rankings, [img.labels for img in data], k=args.k,
                                      map_ns=tuple(args.map_n))
    else:
        data.check_labels(labels)
        rankings = rank_dataset(model, data, labels)
        report = evaluate_single_label(rankings, [i.label for i in data], _ks(args))
    _write_report(report, Path(args.out))
    return EXIT_OK


def cmd_zeroshot(args) -> int:
    RunConfig("zeroshot", paths={"checkpoint": args.checkpoint, "test": args.test,
                                 "unseen": args.unseen, "seen": args.seen,
                                 "train_instances": args.train_instances},
              outputs={"out_dir": args.out}).validate()
    model = io.load_checkpoint(args.checkpoint).model
    test = io.load_dataset(args.test)
    unseen = io.load_label_embeddings(args.unseen)
    seen = io.load_label_embeddings(args.seen) if args.seen else None
    trained = None
    if args.train_instances:
        trained = io.load_dataset(args.train_instances).labels
    report = zero_shot_eval(model, test, unseen, seen, training_labels=trained, ks=_ks(args))
    _write_report(report, Path(args.out))
    return EXIT_OK


def cmd_check_grad(args) -> int:
    results = run_suite(args.configs, args.seed)
    ok = True
    for kind, res in results.items():
        status = "PASS" if res.passed else "FAIL"
        ok &= res.passed
        print(f"{status} {kind}: {res.checked} configs, max relative error "
              f"{res.max_rel_error:.3e} (tol {REL_TOL:g})")
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semembed",
                     description="Structured visual-semantic embeddings over feature vectors.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gensynth", help="write a synthetic train/test/labels set")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--embed-dim", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synth")
    p.set_defaults(func=cmd_gensynth)

    p = sub.add_parser("mine", help="mine single-label instances from a region file")
    p.add_argument("--images", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("train", help="train an embedding model")
    p.add_argument("--instances", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--log", default=None)
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a test file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", default="report")
    p.add_argument("--hit-k", type=int, nargs="+", default=[1, 2, 5, 10])
    p.add_argument("--k", type=int, default=3, help="predicted labels per image (multi-label)")
    p.add_argument("--map-n", type=int, nargs="+", default=[10])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("zeroshot", help="nearest-neighbor evaluation over unseen labels")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--unseen", required=True)
    p.add_argument("--seen", default=None, help="seen labels; enables the generalized setting")
    p.add_argument("--train-instances", default=None,
                   help="training file; its labels must not overlap the unseen set")
    p.add_argument("--out", default="report")
    p.add_argument("--hit-k", type=int, nargs="+", default=[1, 2, 5, 10])
    p.set_defaults(func=cmd_zeroshot)

    p = sub.add_parser("check-grad", help="finite-difference check of every loss gradient")
    p.add_argument("--configs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check_grad)
    return parser


def cli_main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(parser.format_usage() + str(exc), file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        print(parser.format_help(), file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (NumericalError, DegenerateProjectionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
