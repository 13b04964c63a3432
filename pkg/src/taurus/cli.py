"""Operator command line: ingest, train, eval, predict, dose, serve.

Exit codes: 0 success, 2 usage error, 3 data error, 4 model error. Every
command accepts --json to emit a single machine-readable document instead
of the human lines.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dosage, imageclf, ingest, videoclf
from .backbone import IMAGE_BACKBONE, VIDEO_FRAME_BACKBONE
from .errors import (
    ArtifactError,
    ConfigError,
    DosageError,
    MediaError,
    TaurusError,
    ValidationError,
)
from .taxonomy import DEFAULT_THRESHOLD, Prediction, TaskId, as_percent

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_MODEL = 4

IMAGE_TASKS = (TaskId.BREED, TaskId.DISEASE_IMAGE, TaskId.AGE_GROUP, TaskId.WEIGHT_GROUP)


def _print_json(obj: object) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _print_prediction(pred: Prediction, labels: tuple[str, ...], as_json: bool) -> None:
    if as_json:
        _print_json(pred.to_json_obj())
        return
    marker = " (inconclusive)" if pred.inconclusive else ""
    print(f"{pred.label} - {as_percent(pred.confidence)}%{marker}")
    for label, prob in zip(labels, pred.distribution.probs):
        print(f"  {label}: {as_percent(prob)}%")


# ---------------------------------------------------------------------------
# commands


def _cmd_ingest(args: argparse.Namespace) -> int:
    task = TaskId(args.task)
    kind = ingest.MediaKind(args.kind) if args.kind else (
        ingest.MediaKind.VIDEO if task is TaskId.BEHAVIOR_VIDEO else ingest.MediaKind.IMAGE
    )
    manifest = ingest.scan_tree(args.root, task, kind)
    ingest.save_csv(manifest, args.out)
    counts = ingest.class_counts(manifest)
    if args.json:
        _print_json(
            {
                "root": manifest.root,
                "task": task.value,
                "out": str(args.out),
                "classes": counts,
                "total": len(manifest),
            }
        )
    else:
        print(f"Found {len(manifest)} items belonging to {len(manifest.space)} classes.")
        for label, count in counts.items():
            print(f"  {label}: {count}")
        print(f"Manifest written to {args.out}")
    return EXIT_OK


def _load_image_dataset(manifest: ingest.Manifest):
    features = []
    labels = []
    root = Path(manifest.root)
    for entry in manifest.entries:
        tensor = imageclf.preprocess((root / entry.path).read_bytes(), IMAGE_BACKBONE.input_size)
        features.append(imageclf.embed(IMAGE_BACKBONE, tensor))
        labels.append(manifest.space.index_of(entry.label))
    return np.stack(features), np.asarray(labels)


def _load_video_dataset(manifest: ingest.Manifest):
    dataset = []
    root = Path(manifest.root)
    for entry in manifest.entries:
        path = root / entry.path
        if entry.kind is ingest.MediaKind.FRAMESET:
            frames = videoclf.load_frameset_dir(path, VIDEO_FRAME_BACKBONE)
        else:
            frames = videoclf.decode_video_file(path, VIDEO_FRAME_BACKBONE)
        fs = videoclf.featurize(frames, VIDEO_FRAME_BACKBONE)
        dataset.append((fs, manifest.space.index_of(entry.label)))
    return dataset


def _cmd_train(args: argparse.Namespace) -> int:
    task = TaskId(args.task)
    manifest = ingest.load_csv(args.manifest, root=args.root)
    if manifest.space.task != task:
        raise ValidationError(
            f"manifest is for task {manifest.space.task.value}, not {task.value}"
        )
    echo = None if args.json else (lambda e, l: print(f"epoch {e}: loss {l:.6f}"))
    if task is TaskId.BEHAVIOR_VIDEO:
        dataset = _load_video_dataset(manifest)
        hp = videoclf.SequenceHyperParams(
            learning_rate=args.learning_rate,
            epochs=args.epochs,
            dropout_rate=args.dropout,
            seed=args.seed,
            batch_size=args.batch_size,
        )
        head = videoclf.train_sequence_head(dataset, manifest.space, hp, on_epoch=echo)
        videoclf.save_sequence_head(head, args.out)
        final_loss = head.training.final_loss
    else:
        features, labels = _load_image_dataset(manifest)
        hp = imageclf.HeadHyperParams(
            learning_rate=args.learning_rate, epochs=args.epochs, l2=args.l2, seed=args.seed
        )
        head = imageclf.train_head(
            features, labels, manifest.space, hp,
            backbone_id=IMAGE_BACKBONE.id, on_epoch=echo,
        )
        imageclf.save_head(head, args.out)
        final_loss = head.training.final_loss
    if args.json:
        _print_json(
            {
                "task": task.value,
                "out": str(args.out),
                "items": len(manifest),
                "epochs": args.epochs,
                "final_loss": final_loss,
            }
        )
    else:
        print(f"Trained {task.value} on {len(manifest)} items; model saved to {args.out}")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    manifest = ingest.load_csv(args.manifest, root=args.root)
    head = imageclf.load_head(args.model)
    backbone = _backbone_for(head.backbone_id)
    report = imageclf.evaluate(head, backbone, manifest, args.threshold)
    if args.out_report:
        Path(args.out_report).write_text(report.to_csv_text(), encoding="utf-8")
    if args.out_confusion:
        Path(args.out_confusion).write_text(
            json.dumps(report.confusion_json_obj(), indent=2) + "\n", encoding="utf-8"
        )
    if args.json:
        obj = report.confusion_json_obj()
        obj["rows"] = [
            {
                "item": r.item,
                "actual": r.actual,
                "predicted": r.predicted,
                "confidence_percent": r.confidence_percent,
            }
            for r in report.rows
        ]
        _print_json(obj)
    else:
        for row in report.rows:
            print(f"{row.item}: actual={row.actual} predicted={row.predicted} "
                  f"({row.confidence_percent}%)")
        print(f"accuracy: {report.accuracy:.4f} over {len(report.rows)} items "
              f"({len(report.errors)} unreadable)")
    return EXIT_OK


def _backbone_for(backbone_id: str):
    from .service import _resolve_backbone

    if backbone_id == IMAGE_BACKBONE.id:
        return IMAGE_BACKBONE
    if backbone_id == VIDEO_FRAME_BACKBONE.id:
        return VIDEO_FRAME_BACKBONE
    return _resolve_backbone(backbone_id, feature_dim=0)


def _cmd_predict_image(args: argparse.Namespace) -> int:
    head = imageclf.load_head(args.model)
    backbone = _backbone_for(head.backbone_id)
    pred = imageclf.predict_image(
        head, backbone, Path(args.image).read_bytes(), args.threshold
    )
    _print_prediction(pred, head.space.labels, args.json)
    return EXIT_OK


def _cmd_predict_video(args: argparse.Namespace) -> int:
    head = videoclf.load_sequence_head(args.model)
    backbone = _backbone_for(head.backbone_id)
    source = Path(args.video)
    if source.is_dir():
        frames = videoclf.load_frameset_dir(source, backbone)
    else:
        frames = videoclf.decode_video_file(source, backbone)
    fs = videoclf.featurize(frames, backbone)
    pred = videoclf.predict_video(head, fs, args.threshold)
    _print_prediction(pred, head.space.labels, args.json)
    return EXIT_OK


def _cmd_dose(args: argparse.Namespace) -> int:
    registry = dosage.load_registry(args.registry or dosage.sample_registry_path())
    try:
        band = dosage.AgeBand(args.age_band)
    except ValueError:
        raise ValidationError(
            f"unknown age band {args.age_band!r}; expected one of "
            f"{[b.value for b in dosage.AgeBand]}"
        )
    group = dosage.weight_group_for_label(args.weight_group)
    plan = dosage.recommend_dose(args.disease, band, group, registry)
    if args.json:
        _print_json(plan.to_json_obj())
    else:
        print(f"{plan.drug} for {plan.disease}")
        print(f"  dose: {plan.dose_mg:.2f} mg per administration "
              f"({plan.weight_kg_used:.3f} kg animal)")
        print(f"  schedule: {plan.times_per_day}x/day for {plan.duration_days} days, "
              f"route {plan.route}")
        for warning in plan.warnings:
            print(f"  warning: {warning}")
        for note in plan.notes:
            print(f"  note: {note}")
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        model_dir=args.models,
        registry_path=args.registry,
        cases_dir=args.cases,
        ui_dir=args.ui,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taurus", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit machine-readable JSON")

    p = sub.add_parser("ingest", parents=[common], help="scan a dataset tree into a manifest CSV")
    p.add_argument("--root", required=True)
    p.add_argument("--task", required=True, choices=[t.value for t in TaskId])
    p.add_argument("--kind", choices=["image", "video"], default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="train a model from a manifest")
    p.add_argument("--task", required=True, choices=[t.value for t in TaskId])
    p.add_argument("--manifest", required=True)
    p.add_argument("--root", default=None, help="dataset root (default: manifest directory)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--dropout", type=float, default=0.4)
    p.add_argument("--batch-size", type=int, default=10)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate an image model on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--root", default=None)
    p.add_argument("--model", required=True)
    p.add_argument("--out-report", default=None)
    p.add_argument("--out-confusion", default=None)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("predict-image", parents=[common], help="classify one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.set_defaults(fn=_cmd_predict_image)

    p = sub.add_parser("predict-video", parents=[common],
                       help="classify one clip (file or frame directory)")
    p.add_argument("--model", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.set_defaults(fn=_cmd_predict_video)

    p = sub.add_parser("dose", parents=[common], help="recommend a dose from the drug registry")
    p.add_argument("--disease", required=True)
    p.add_argument("--age-band", required=True)
    p.add_argument("--weight-group", required=True)
    p.add_argument("--registry", default=None)
    p.set_defaults(fn=_cmd_dose)

    p = sub.add_parser("serve", parents=[common], help="run the REST service")
    p.add_argument("--models", default=None, help="model directory (or TAURUS_MODEL_DIR)")
    p.add_argument("--registry", default=None)
    p.add_argument("--cases", default=None)
    p.add_argument("--ui", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=_cmd_serve)

    return parser


def run_cli(argv: list[str] | None = None) -> int:
    """Parse and dispatch; maps failures to the documented exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "learning_rate", None) is None and args.command == "train":
        args.learning_rate = 0.2 if args.task == TaskId.BEHAVIOR_VIDEO.value else 0.5
    try:
        return args.fn(args)
    except (ArtifactError, ConfigError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (TaurusError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
