"""Image preprocessing and frozen feature-extraction backbones.

Real pretrained convolutional backbones plug in through
``register_backbone``. The shipped stub backbone average-pools the input
to an 8x8 grid and applies a fixed-seed random projection, which makes it
linear, fast, and bit-for-bit reproducible across runs: exactly what desk
scale training and the test suite need.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, MediaError, ValidationError

__all__ = [
    "BackboneSpec",
    "stub_backbone",
    "IMAGE_BACKBONE",
    "VIDEO_FRAME_BACKBONE",
    "preprocess",
    "scale_pixels",
    "embed",
    "register_backbone",
]

POOL_GRID = 8

EmbedFn = Callable[["BackboneSpec", np.ndarray], np.ndarray]

_REGISTRY: dict[str, EmbedFn] = {}


@dataclass(frozen=True)
class BackboneSpec:
    """Identity and input/output contract of a frozen feature extractor."""

    id: str
    input_size: int
    feature_dim: int
    deterministic: bool = True

    def __post_init__(self) -> None:
        if self.input_size < POOL_GRID:
            raise ValidationError(f"backbone input_size must be >= {POOL_GRID}")
        if self.feature_dim <= 0:
            raise ValidationError("backbone feature_dim must be positive")


def stub_backbone(input_size: int = 224, feature_dim: int = 1280) -> BackboneSpec:
    """The built-in deterministic stub at the given geometry."""
    return BackboneSpec(
        id=f"stub-{input_size}-{feature_dim}",
        input_size=input_size,
        feature_dim=feature_dim,
        deterministic=True,
    )


# Image tasks embed at 224 -> 1280 features, video frames at 299 -> 2048,
# mirroring the conventional geometry of the pretrained networks these
# stubs stand in for.
IMAGE_BACKBONE = stub_backbone(224, 1280)
VIDEO_FRAME_BACKBONE = stub_backbone(299, 2048)


def register_backbone(backbone_id: str, fn: EmbedFn) -> None:
    """Plug in a real embedding function for ``backbone_id``."""
    _REGISTRY[backbone_id] = fn


def scale_pixels(values: np.ndarray) -> np.ndarray:
    """Map channel values from [0, 255] to [-1, 1]: v / 127.5 - 1."""
    return np.asarray(values, dtype=np.float32) / np.float32(127.5) - np.float32(1.0)


def preprocess(image_bytes: bytes, target: int) -> np.ndarray:
    """Decode, bilinear-resize to target x target, and scale to [-1, 1]."""
    if target <= 0:
        raise ValidationError("preprocess target size must be positive")
    try:
        with Image.open(io.BytesIO(image_bytes)) as img:
            img.load()
            rgb = img.convert("RGB")
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise MediaError(f"could not decode image: {exc}") from exc
    if rgb.size != (target, target):
        rgb = rgb.resize((target, target), Image.BILINEAR)
    return scale_pixels(np.asarray(rgb))


@lru_cache(maxsize=8)
def _stub_projection(feature_dim: int) -> np.ndarray:
    pool_dim = POOL_GRID * POOL_GRID * 3
    key = hashlib.sha256(f"taurus-stub-projection:{POOL_GRID}:{feature_dim}".encode()).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(key[:8], "big")))
    return rng.standard_normal((pool_dim, feature_dim)) / np.sqrt(pool_dim)


def _pool_axis(arr: np.ndarray, axis: int) -> np.ndarray:
    n = arr.shape[axis]
    starts = (np.arange(POOL_GRID) * n) // POOL_GRID
    ends = (np.arange(1, POOL_GRID + 1) * n) // POOL_GRID
    sums = np.add.reduceat(arr, starts, axis=axis)
    lengths = (ends - starts).astype(np.float64)
    shape = [1] * arr.ndim
    shape[axis] = POOL_GRID
    return sums / lengths.reshape(shape)


def _stub_embed(backbone: BackboneSpec, tensor: np.ndarray) -> np.ndarray:
    pooled = _pool_axis(_pool_axis(tensor.astype(np.float64), 0), 1)
    flat = pooled.reshape(-1)
    return (flat @ _stub_projection(backbone.feature_dim)).astype(np.float32)


def embed(backbone: BackboneSpec, tensor: np.ndarray) -> np.ndarray:
    """Embed one preprocessed image tensor into a feature vector."""
    expected = (backbone.input_size, backbone.input_size, 3)
    if tuple(tensor.shape) != expected:
        raise ValidationError(
            f"tensor shape {tuple(tensor.shape)} does not match backbone "
            f"input {expected}"
        )
    if backbone.id.startswith("stub-"):
        return _stub_embed(backbone, tensor)
    fn = _REGISTRY.get(backbone.id)
    if fn is None:
        raise ConfigError(f"no embedding function registered for backbone {backbone.id!r}")
    features = np.asarray(fn(backbone, tensor), dtype=np.float32)
    if features.shape != (backbone.feature_dim,):
        raise ConfigError(
            f"backbone {backbone.id!r} returned shape {features.shape}, "
            f"expected ({backbone.feature_dim},)"
        )
    return features
