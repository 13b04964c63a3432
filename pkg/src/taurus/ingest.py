"""Directory-per-label dataset scanning, class counts, and stratified splits.

A dataset tree looks like::

    root/
      <label A>/ img001.jpg ...
      <label B>/ clip01.mp4  frames_02/  ...

Immediate subdirectory names become the label space (they must include an
``Unknown`` class). Video scans treat a subdirectory of a label directory
as a single "frameset" entry: a directory of numerically ordered frame
images standing in for one clip.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path, PurePosixPath

from .errors import ValidationError
from .taxonomy import LabelSpace, TaskId, build_label_space

__all__ = [
    "MediaKind",
    "ManifestEntry",
    "Manifest",
    "SplitSpec",
    "scan_tree",
    "class_counts",
    "split",
    "save_csv",
    "load_csv",
    "IMAGE_EXTENSIONS",
    "VIDEO_EXTENSIONS",
]

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png", ".bmp"}
VIDEO_EXTENSIONS = {".mp4", ".avi", ".mov"}


class MediaKind(str, Enum):
    IMAGE = "image"
    VIDEO = "video"
    FRAMESET = "frameset"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ManifestEntry:
    """One media item: a path relative to the manifest root."""

    path: str
    task: TaskId
    label: str
    kind: MediaKind

    def __post_init__(self) -> None:
        if not self.path or self.path.startswith("/") or "\\" in self.path:
            raise ValidationError(
                f"entry path must be relative with forward slashes, got {self.path!r}"
            )


@dataclass(frozen=True)
class Manifest:
    """An inventory of media files under one dataset root."""

    root: str
    space: LabelSpace
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self) -> None:
        labels = set(self.space.labels)
        for entry in self.entries:
            if entry.label not in labels:
                raise ValidationError(
                    f"entry {entry.path!r} has label {entry.label!r} outside the label space"
                )
        paths = [entry.path for entry in self.entries]
        if len(set(paths)) != len(paths):
            raise ValidationError("entry paths must be unique within a manifest")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic stratified split: per-label shuffle keyed by (seed, label)."""

    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValidationError("train_fraction must lie in (0, 1]")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")


def _sorted_entries(entries: list[ManifestEntry]) -> tuple[ManifestEntry, ...]:
    return tuple(sorted(entries, key=lambda e: e.path.encode("utf-8")))


def scan_tree(root: str | Path, task: TaskId, kind: MediaKind = MediaKind.IMAGE) -> Manifest:
    """Scan a directory-per-label tree into a manifest.

    ``kind`` selects which media count: IMAGE keeps image files, VIDEO keeps
    video files plus frameset directories. Entries come back sorted by path,
    so an unchanged tree always scans to an identical manifest.
    """
    root = Path(root)
    if not root.exists():
        raise FileNotFoundError(f"dataset root does not exist: {root}")
    if not root.is_dir():
        raise NotADirectoryError(f"dataset root is not a directory: {root}")
    if kind not in (MediaKind.IMAGE, MediaKind.VIDEO):
        raise ValidationError("scan kind must be image or video")

    label_dirs = sorted((p for p in root.iterdir() if p.is_dir()), key=lambda p: p.name)
    if not label_dirs:
        raise ValidationError(f"dataset root has no label subdirectories: {root}")

    space = build_label_space(task, [p.name for p in label_dirs])
    entries: list[ManifestEntry] = []
    for label_dir in label_dirs:
        label = label_dir.name.strip()
        for child in label_dir.iterdir():
            rel = PurePosixPath(label_dir.name) / child.name
            if child.is_file():
                ext = child.suffix.lower()
                wanted = IMAGE_EXTENSIONS if kind is MediaKind.IMAGE else VIDEO_EXTENSIONS
                if ext in wanted:
                    entries.append(ManifestEntry(str(rel), task, label, kind))
            elif child.is_dir() and kind is MediaKind.VIDEO:
                has_frames = any(
                    f.is_file() and f.suffix.lower() in IMAGE_EXTENSIONS
                    for f in child.iterdir()
                )
                if has_frames:
                    entries.append(ManifestEntry(str(rel), task, label, MediaKind.FRAMESET))

    return Manifest(root=str(root), space=space, entries=_sorted_entries(entries))


def class_counts(manifest: Manifest) -> dict[str, int]:
    """Entries per label, in label-space order; absent labels report 0."""
    counts = {label: 0 for label in manifest.space.labels}
    for entry in manifest.entries:
        counts[entry.label] += 1
    return counts


def _label_rng(seed: int, label: str) -> random.Random:
    # Shuffle order must be stable across runs and platforms, so derive the
    # generator seed from a content hash rather than Python's salted hash().
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def split(manifest: Manifest, spec: SplitSpec) -> tuple[Manifest, Manifest]:
    """Stratified train/validation split, deterministic in ``spec.seed``."""
    train_entries: list[ManifestEntry] = []
    val_entries: list[ManifestEntry] = []
    for label in manifest.space.labels:
        members = [e for e in manifest.entries if e.label == label]
        _label_rng(spec.seed, label).shuffle(members)
        n_train = math.ceil(spec.train_fraction * len(members))
        train_entries.extend(members[:n_train])
        val_entries.extend(members[n_train:])
    train = Manifest(manifest.root, manifest.space, _sorted_entries(train_entries))
    val = Manifest(manifest.root, manifest.space, _sorted_entries(val_entries))
    return train, val


CSV_HEADER = ["path", "task", "label", "kind"]


def save_csv(manifest: Manifest, out_path: str | Path) -> None:
    """Write the manifest as UTF-8 CSV with header ``path,task,label,kind``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for entry in manifest.entries:
        writer.writerow([entry.path, entry.task.value, entry.label, entry.kind.value])
    Path(out_path).write_text(buf.getvalue(), encoding="utf-8")


def load_csv(csv_path: str | Path, root: str | Path | None = None) -> Manifest:
    """Read a manifest CSV back.

    ``root`` defaults to the CSV's own directory. The label space is rebuilt
    from the labels present in the rows, so a class that had zero entries
    does not survive a CSV round-trip; keep at least one file per class.
    """
    csv_path = Path(csv_path)
    text = csv_path.read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or rows[0] != CSV_HEADER:
        raise ValidationError(f"manifest CSV must start with header {','.join(CSV_HEADER)}")
    body = rows[1:]
    if not body:
        raise ValidationError("manifest CSV has no entries")
    tasks = {row[1] for row in body}
    if len(tasks) != 1:
        raise ValidationError(f"manifest CSV mixes tasks: {sorted(tasks)}")
    task = TaskId(next(iter(tasks)))
    space = build_label_space(task, sorted({row[2] for row in body}))
    entries = [
        ManifestEntry(path=row[0], task=task, label=row[2], kind=MediaKind(row[3]))
        for row in body
    ]
    resolved_root = Path(root) if root is not None else csv_path.parent
    return Manifest(root=str(resolved_root), space=space, entries=_sorted_entries(entries))
