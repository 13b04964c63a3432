"""Task identifiers, ordered label spaces, and prediction records.

Label index order is always the ascending byte-order sort of the label
names. Class-map constants for the five shipped tasks live in
``CANONICAL_LABELS`` so that loaders and the service can cross-check
artifacts against them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Iterable

from .errors import ValidationError

__all__ = [
    "TaskId",
    "LabelSpace",
    "Distribution",
    "Prediction",
    "build_label_space",
    "top1",
    "as_percent",
    "canonical_space",
    "CANONICAL_LABELS",
    "DEFAULT_THRESHOLD",
    "UNKNOWN_LABEL",
]

UNKNOWN_LABEL = "Unknown"

# Predictions below this confidence are flagged inconclusive unless the
# caller configures a different per-task threshold.
DEFAULT_THRESHOLD = 0.5


class TaskId(str, Enum):
    """The five classification tasks the toolkit ships."""

    BREED = "breed"
    DISEASE_IMAGE = "disease_image"
    BEHAVIOR_VIDEO = "behavior_video"
    AGE_GROUP = "age_group"
    WEIGHT_GROUP = "weight_group"

    def __str__(self) -> str:  # serialized form is the lowercase value
        return self.value


def _byte_key(label: str) -> bytes:
    return label.encode("utf-8")


@dataclass(frozen=True)
class LabelSpace:
    """Ordered class labels for one task; index i maps to labels[i]."""

    task: TaskId
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValidationError("label space must contain at least one label")
        if any(not lbl for lbl in self.labels):
            raise ValidationError("labels must be non-empty strings")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("labels must be unique")
        keys = [_byte_key(lbl) for lbl in self.labels]
        if keys != sorted(keys):
            raise ValidationError(
                "labels must be sorted ascending by byte value; "
                "use build_label_space to normalize"
            )
        if UNKNOWN_LABEL not in self.labels:
            raise ValidationError(
                f"every label space must contain the literal label {UNKNOWN_LABEL!r}"
            )

    def __len__(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"label {label!r} not in {self.task} label space") from None

    def to_json_obj(self) -> dict:
        return {"task": self.task.value, "labels": list(self.labels)}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "LabelSpace":
        return cls(task=TaskId(obj["task"]), labels=tuple(obj["labels"]))


def build_label_space(task: TaskId, raw_labels: Iterable[str]) -> LabelSpace:
    """Build the label space for a task from raw (e.g. directory) names.

    Names are whitespace-trimmed and sorted ascending by byte value, which
    reproduces the index maps the trained models were exported with.
    """
    trimmed = [lbl.strip() for lbl in raw_labels]
    if not trimmed:
        raise ValidationError("raw_labels must be non-empty")
    if any(not lbl for lbl in trimmed):
        raise ValidationError("labels must be non-empty after trimming whitespace")
    if len(set(trimmed)) != len(trimmed):
        dupes = sorted({lbl for lbl in trimmed if trimmed.count(lbl) > 1})
        raise ValidationError(f"duplicate labels after trimming: {dupes}")
    ordered = tuple(sorted(trimmed, key=_byte_key))
    return LabelSpace(task=task, labels=ordered)


@dataclass(frozen=True)
class Distribution:
    """Normalized confidence distribution aligned with a LabelSpace."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        # Coerce numpy scalars so repr/json stay plain-float clean.
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if not self.probs:
            raise ValidationError("distribution must be non-empty")
        if any(p < 0.0 or p > 1.0 for p in self.probs):
            raise ValidationError("distribution entries must lie in [0, 1]")
        total = sum(self.probs)
        if abs(total - 1.0) > 1e-6:
            raise ValidationError(f"distribution sums to {total!r}, expected 1 within 1e-6")

    def __len__(self) -> int:
        return len(self.probs)

    def argmax(self) -> int:
        """Index of the largest probability; ties break to the lowest index."""
        return max(range(len(self.probs)), key=lambda i: (self.probs[i], -i))


@dataclass(frozen=True)
class Prediction:
    """Top-1 decision over a label space, with the full distribution kept."""

    task: TaskId
    label: str
    confidence: float
    distribution: Distribution
    inconclusive: bool
    threshold: float

    def to_json_obj(self) -> dict:
        return {
            "task": self.task.value,
            "label": self.label,
            "confidence": self.confidence,
            "confidence_percent": as_percent(self.confidence),
            "distribution": list(self.distribution.probs),
            "inconclusive": self.inconclusive,
            "threshold": self.threshold,
        }


def top1(distribution: Distribution, space: LabelSpace, threshold: float = DEFAULT_THRESHOLD) -> Prediction:
    """Turn a distribution into the top-1 prediction for ``space``."""
    if len(distribution) != len(space):
        raise ValidationError(
            f"distribution length {len(distribution)} does not match "
            f"label space size {len(space)}"
        )
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError("threshold must lie in [0, 1]")
    idx = distribution.argmax()
    confidence = distribution.probs[idx]
    return Prediction(
        task=space.task,
        label=space.labels[idx],
        confidence=confidence,
        distribution=distribution,
        inconclusive=confidence < threshold,
        threshold=threshold,
    )


def as_percent(confidence: float) -> int:
    """Render a confidence as an integer percent, rounding half up.

    Uses decimal arithmetic so 0.955 -> 96 even though the nearest binary
    double is fractionally below 0.955.
    """
    return int(
        (Decimal(repr(float(confidence))) * 100).quantize(Decimal("1"), rounding=ROUND_HALF_UP)
    )


# Class maps of the five shipped tasks (directory names of the source
# datasets, in byte order, i.e. exactly the exported index maps).
CANONICAL_LABELS: dict[TaskId, tuple[str, ...]] = {
    TaskId.BREED: (
        "Ayrshire cattle",
        "Brown Swiss cattle",
        "Holstein Friesian cattle",
        "Jersey cattle",
        "Unknown",
    ),
    TaskId.DISEASE_IMAGE: (
        "Bovine Johne_s Disease",
        "Foot _ Mouth Disease",
        "Healthy Cattle",
        "Lumpy Skin Disease",
        "Mastitis Disease",
        "Milk Fever Disease",
        "Unknown",
    ),
    TaskId.BEHAVIOR_VIDEO: (
        "Bovine Spongiform Encephalopathy",
        "Healthy",
        "Heat Stress",
        "Lameness",
        "Unknown",
    ),
    TaskId.AGE_GROUP: (
        "1 to 5 Years_Mouth",
        "11to 15 Years_Mouth",
        "5 to 10 Years_Mouth",
        "Unknown",
    ),
    TaskId.WEIGHT_GROUP: (
        "183lbs-278lbs_Body",
        "259lbs-548lbs_Body",
        "93lbs-177lbs_Body",
        "Above 498lbs_Body",
        "Unknown",
    ),
}


def canonical_space(task: TaskId) -> LabelSpace:
    """The shipped label space for ``task``."""
    return LabelSpace(task=task, labels=CANONICAL_LABELS[task])
