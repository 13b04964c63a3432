"""Shared fixtures: synthetic images, dataset trees, and trained models."""

from __future__ import annotations

import io

import numpy as np
import pytest
from PIL import Image

from taurus.backbone import IMAGE_BACKBONE, VIDEO_FRAME_BACKBONE, embed, preprocess
from taurus.imageclf import HeadHyperParams, train_head
from taurus.taxonomy import CANONICAL_LABELS, TaskId, canonical_space

# Per-class counts of the ingest fixture trees (breeds / diseases / video).
BREED_COUNTS = {
    "Ayrshire cattle": 260,
    "Brown Swiss cattle": 238,
    "Holstein Friesian cattle": 254,
    "Jersey cattle": 252,
    "Unknown": 119,
}
DISEASE_COUNTS = {
    "Bovine Johne_s Disease": 32,
    "Foot _ Mouth Disease": 75,
    "Lumpy Skin Disease": 92,
    "Mastitis Disease": 74,
    "Milk Fever Disease": 28,
    "Healthy Cattle": 61,
    "Unknown": 92,
}
VIDEO_COUNTS = {
    "Bovine Spongiform Encephalopathy": 90,
    "Lameness": 37,
    "Heat Stress": 21,
    "Healthy": 19,
    "Unknown": 81,
}

# Five well-separated colors, one per canonical breed label: solid-color
# images make the stub features linearly separable.
BREED_COLORS = {
    "Ayrshire cattle": (220, 40, 40),
    "Brown Swiss cattle": (40, 200, 40),
    "Holstein Friesian cattle": (40, 40, 220),
    "Jersey cattle": (230, 230, 40),
    "Unknown": (127, 127, 127),
}


def png_bytes(color: tuple[int, int, int], size: int = 32, noise_seed: int | None = None) -> bytes:
    """A small PNG, optionally with mild per-pixel noise for variety."""
    if noise_seed is None:
        img = Image.new("RGB", (size, size), color)
    else:
        rng = np.random.default_rng(noise_seed)
        base = np.broadcast_to(np.array(color, dtype=np.int16), (size, size, 3))
        jitter = rng.integers(-12, 13, size=(size, size, 3), dtype=np.int16)
        img = Image.fromarray(np.clip(base + jitter, 0, 255).astype(np.uint8))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def build_tree(root, counts: dict[str, int], suffix: str = ".jpg") -> None:
    for label, n in counts.items():
        sub = root / label
        sub.mkdir()
        for i in range(n):
            (sub / f"item_{i:04d}{suffix}").touch()


@pytest.fixture(scope="session")
def breeds_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("breeds_fixture")
    build_tree(root, BREED_COUNTS, ".jpg")
    return root


@pytest.fixture(scope="session")
def diseases_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("diseases_fixture")
    build_tree(root, DISEASE_COUNTS, ".png")
    return root


@pytest.fixture(scope="session")
def video_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("video_fixture")
    build_tree(root, VIDEO_COUNTS, ".mp4")
    return root


@pytest.fixture(scope="session")
def breed_image_set():
    """20 images per canonical breed label, embedded and ready to train on."""
    images: dict[str, list[bytes]] = {}
    seed = 0
    for label, color in BREED_COLORS.items():
        images[label] = [png_bytes(color, noise_seed=seed + i) for i in range(20)]
        seed += 1000
    return images


@pytest.fixture(scope="session")
def breed_head(breed_image_set):
    """A head trained on the canonical breed space over the color fixture."""
    space = canonical_space(TaskId.BREED)
    features, labels = [], []
    for label, blobs in breed_image_set.items():
        idx = space.index_of(label)
        for data in blobs:
            tensor = preprocess(data, IMAGE_BACKBONE.input_size)
            features.append(embed(IMAGE_BACKBONE, tensor))
            labels.append(idx)
    hp = HeadHyperParams(learning_rate=0.5, epochs=300, l2=0.0, seed=0)
    return train_head(np.stack(features), labels, space, hp, backbone_id=IMAGE_BACKBONE.id)


def make_frameset(directory, color: tuple[int, int, int], n_frames: int = 3, seed: int = 0) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(n_frames):
        (directory / f"frame_{i:03d}.png").write_bytes(png_bytes(color, noise_seed=seed + i))
