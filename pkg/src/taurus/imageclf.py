"""Transfer-learning image classification: frozen backbone + softmax head.

The trainable part is a multinomial logistic regression over backbone
features, optimized by full-batch gradient descent on softmax
cross-entropy with an optional L2 penalty. Zero initialization plus a
convex objective makes training deterministic without any random state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .artifacts import load_artifact, save_artifact
from .backbone import BackboneSpec, embed, preprocess
from .errors import ArtifactError, ConfigError, DataError, MediaError, ValidationError
from .ingest import Manifest
from .taxonomy import (
    DEFAULT_THRESHOLD,
    Distribution,
    LabelSpace,
    Prediction,
    TaskId,
    as_percent,
    top1,
)

__all__ = [
    "HeadHyperParams",
    "TrainingMeta",
    "HeadModel",
    "softmax",
    "loss_and_grad",
    "train_head",
    "predict_features",
    "predict_image",
    "EvalRow",
    "EvalReport",
    "evaluate",
    "save_head",
    "load_head",
]


@dataclass(frozen=True)
class HeadHyperParams:
    learning_rate: float = 0.5
    epochs: int = 200
    l2: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.l2 < 0:
            raise ValidationError("l2 must be >= 0")


@dataclass(frozen=True)
class TrainingMeta:
    epochs: int
    learning_rate: float
    l2: float
    seed: int
    final_loss: float

    def to_json_obj(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "l2": self.l2,
            "seed": self.seed,
            "final_loss": self.final_loss,
        }


@dataclass(frozen=True)
class HeadModel:
    """Trained softmax head over a frozen backbone's features."""

    weights: np.ndarray  # feature_dim x n_classes, float32
    bias: np.ndarray  # n_classes, float32
    space: LabelSpace
    backbone_id: str
    training: TrainingMeta

    def __post_init__(self) -> None:
        n_classes = len(self.space)
        if self.weights.ndim != 2 or self.weights.shape[1] != n_classes:
            raise ValidationError(
                f"weights shape {self.weights.shape} does not match {n_classes} classes"
            )
        if self.bias.shape != (n_classes,):
            raise ValidationError(f"bias shape {self.bias.shape} != ({n_classes},)")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValidationError("head parameters must be finite")

    @property
    def feature_dim(self) -> int:
        return int(self.weights.shape[0])


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax along the last axis."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean softmax cross-entropy + L2 on weights, with analytic gradients."""
    n = features.shape[0]
    logits = features @ weights + bias
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(n), labels]))
    loss += 0.5 * l2 * float(np.sum(weights * weights))

    probs = softmax(logits)
    probs[np.arange(n), labels] -= 1.0
    probs /= n
    grad_w = features.T @ probs + l2 * weights
    grad_b = probs.sum(axis=0)
    return loss, grad_w, grad_b


def train_head(
    features: Sequence[np.ndarray] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
    space: LabelSpace,
    hp: HeadHyperParams = HeadHyperParams(),
    backbone_id: str = "",
    on_epoch: Callable[[int, float], None] | None = None,
) -> HeadModel:
    """Train the softmax head by full-batch gradient descent.

    ``on_epoch`` (if given) is called with (epoch, loss) after every update,
    which is how the CLI prints its progress lines.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValidationError("features must be a non-empty N x feature_dim matrix")
    if y.shape != (x.shape[0],):
        raise ValidationError("labels must align one-to-one with features")
    n_classes = len(space)
    if np.any(y < 0) or np.any(y >= n_classes):
        raise ValidationError(f"label indices must lie in [0, {n_classes})")
    if not np.all(np.isfinite(x)):
        raise DataError("features contain non-finite values")

    weights = np.zeros((x.shape[1], n_classes), dtype=np.float64)
    bias = np.zeros(n_classes, dtype=np.float64)

    loss = float("nan")
    for epoch in range(hp.epochs):
        loss, grad_w, grad_b = loss_and_grad(weights, bias, x, y, hp.l2)
        weights -= hp.learning_rate * grad_w
        bias -= hp.learning_rate * grad_b
        if not (np.isfinite(loss) and np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise DataError(f"training diverged at epoch {epoch} (loss={loss!r})")
        if on_epoch is not None:
            on_epoch(epoch, loss)
    final_loss, _, _ = loss_and_grad(weights, bias, x, y, hp.l2)

    return HeadModel(
        weights=weights.astype(np.float32),
        bias=bias.astype(np.float32),
        space=space,
        backbone_id=backbone_id,
        training=TrainingMeta(
            epochs=hp.epochs,
            learning_rate=hp.learning_rate,
            l2=hp.l2,
            seed=hp.seed,
            final_loss=final_loss,
        ),
    )


def predict_features(
    head: HeadModel, features: np.ndarray, threshold: float = DEFAULT_THRESHOLD
) -> Prediction:
    """Top-1 prediction from an already-embedded feature vector."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.shape != (head.feature_dim,):
        raise ValidationError(
            f"feature vector shape {feats.shape} != ({head.feature_dim},)"
        )
    logits = feats @ head.weights.astype(np.float64) + head.bias.astype(np.float64)
    distribution = Distribution(tuple(softmax(logits)))
    return top1(distribution, head.space, threshold)


def predict_image(
    head: HeadModel,
    backbone: BackboneSpec,
    image_bytes: bytes,
    threshold: float = DEFAULT_THRESHOLD,
) -> Prediction:
    """preprocess -> embed -> affine -> softmax -> top-1."""
    if head.backbone_id != backbone.id:
        raise ConfigError(
            f"model was trained against backbone {head.backbone_id!r}, "
            f"got {backbone.id!r}"
        )
    tensor = preprocess(image_bytes, backbone.input_size)
    features = embed(backbone, tensor)
    return predict_features(head, features, threshold)


@dataclass(frozen=True)
class EvalRow:
    item: str
    actual: str
    predicted: str
    confidence_percent: int


@dataclass(frozen=True)
class EvalReport:
    """Per-item results plus confusion matrix, in manifest order."""

    labels: tuple[str, ...]
    rows: tuple[EvalRow, ...]
    confusion: tuple[tuple[int, ...], ...]  # actual x predicted
    accuracy: float
    errors: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def to_csv_text(self) -> str:
        lines = ["item,actual,predicted,confidence_percent"]
        for row in self.rows:
            lines.append(f"{row.item},{row.actual},{row.predicted},{row.confidence_percent}")
        return "\n".join(lines) + "\n"

    def confusion_json_obj(self) -> dict:
        return {
            "labels": list(self.labels),
            "matrix": [list(r) for r in self.confusion],
            "accuracy": self.accuracy,
            "errors": [{"item": item, "error": msg} for item, msg in self.errors],
        }


def evaluate(
    head: HeadModel,
    backbone: BackboneSpec,
    manifest: Manifest,
    threshold: float = DEFAULT_THRESHOLD,
) -> EvalReport:
    """Predict every manifest entry and report rows, confusion, accuracy.

    Unreadable media becomes an error row: excluded from the confusion
    matrix and the accuracy denominator, reported separately.
    """
    if not manifest.entries:
        raise ValidationError("cannot evaluate an empty manifest")
    if manifest.space.task != head.space.task:
        raise ValidationError(
            f"manifest task {manifest.space.task} != model task {head.space.task}"
        )
    if manifest.space.labels != head.space.labels:
        raise ValidationError("manifest label space does not match the model's")

    n = len(head.space)
    confusion = np.zeros((n, n), dtype=np.int64)
    rows: list[EvalRow] = []
    errors: list[tuple[str, str]] = []
    for entry in manifest.entries:
        media_path = Path(manifest.root) / entry.path
        try:
            image_bytes = media_path.read_bytes()
            pred = predict_image(head, backbone, image_bytes, threshold)
        except (OSError, MediaError) as exc:
            errors.append((entry.path, str(exc)))
            continue
        rows.append(
            EvalRow(
                item=entry.path,
                actual=entry.label,
                predicted=pred.label,
                confidence_percent=as_percent(pred.confidence),
            )
        )
        confusion[head.space.index_of(entry.label), head.space.index_of(pred.label)] += 1

    evaluated = int(confusion.sum())
    if evaluated == 0:
        raise DataError("no manifest entry could be read; nothing to evaluate")
    accuracy = float(np.trace(confusion) / evaluated)
    return EvalReport(
        labels=head.space.labels,
        rows=tuple(rows),
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        accuracy=accuracy,
        errors=tuple(errors),
    )


def save_head(model: HeadModel, directory: str | Path) -> None:
    """Persist as model.json + weights.bin (tensors head.W, head.b)."""
    meta = {
        "kind": "image_head",
        "task": model.space.task.value,
        "labels": list(model.space.labels),
        "backbone_id": model.backbone_id,
        "feature_dim": model.feature_dim,
        "training": model.training.to_json_obj(),
    }
    save_artifact(directory, meta, {"head.W": model.weights, "head.b": model.bias})


def load_head(directory: str | Path) -> HeadModel:
    meta, tensors = load_artifact(directory)
    if meta.get("kind") != "image_head":
        raise ArtifactError(f"{directory}: expected an image_head artifact, got {meta.get('kind')!r}")
    try:
        space = LabelSpace(task=TaskId(meta["task"]), labels=tuple(meta["labels"]))
        training = TrainingMeta(**meta["training"])
        weights = tensors["head.W"]
        bias = tensors["head.b"]
    except (KeyError, TypeError, ValueError, ValidationError) as exc:
        raise ArtifactError(f"{directory}: invalid image_head metadata: {exc}") from exc
    if int(meta.get("feature_dim", -1)) != weights.shape[0]:
        raise ArtifactError(
            f"{directory}: feature_dim {meta.get('feature_dim')} does not match "
            f"tensor head.W shape {weights.shape}"
        )
    return HeadModel(
        weights=weights,
        bias=bias,
        space=space,
        backbone_id=str(meta.get("backbone_id", "")),
        training=training,
    )
