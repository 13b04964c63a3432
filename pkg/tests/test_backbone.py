"""Preprocessing and the deterministic stub feature extractor."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import png_bytes
from taurus.backbone import (
    IMAGE_BACKBONE,
    VIDEO_FRAME_BACKBONE,
    BackboneSpec,
    embed,
    preprocess,
    register_backbone,
    scale_pixels,
    stub_backbone,
)
from taurus.errors import ConfigError, MediaError, ValidationError


class TestPreprocess:
    def test_all_black_maps_to_minus_one(self):
        tensor = preprocess(png_bytes((0, 0, 0)), 224)
        assert tensor.shape == (224, 224, 3)
        assert tensor.dtype == np.float32
        np.testing.assert_array_equal(tensor, np.float32(-1.0))

    def test_all_white_maps_to_plus_one(self):
        tensor = preprocess(png_bytes((255, 255, 255)), 32)
        np.testing.assert_allclose(tensor, 1.0, atol=1e-6)

    def test_target_sized_image_not_resampled(self):
        rng = np.random.default_rng(0)
        raw = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        import io

        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(raw).save(buf, format="PNG")
        tensor = preprocess(buf.getvalue(), 16)
        np.testing.assert_array_equal(tensor, scale_pixels(raw))

    def test_mid_gray_scales_to_zero(self):
        mid = np.full((4, 4, 3), 127.5)
        np.testing.assert_allclose(scale_pixels(mid), 0.0, atol=1e-6)

    def test_undecodable_bytes(self):
        with pytest.raises(MediaError):
            preprocess(b"definitely not an image", 224)

    def test_nonpositive_target(self):
        with pytest.raises(ValidationError):
            preprocess(png_bytes((1, 2, 3)), 0)


class TestStubEmbed:
    def test_zero_tensor_gives_zero_features(self):
        tensor = np.zeros((224, 224, 3), dtype=np.float32)
        features = embed(IMAGE_BACKBONE, tensor)
        assert features.shape == (1280,)
        np.testing.assert_array_equal(features, 0.0)

    def test_deterministic_across_calls(self):
        tensor = preprocess(png_bytes((10, 200, 30), noise_seed=5), 224)
        a = embed(IMAGE_BACKBONE, tensor)
        b = embed(IMAGE_BACKBONE, tensor)
        assert a.tobytes() == b.tobytes()

    def test_linearity_doubled_input(self):
        tensor = preprocess(png_bytes((37, 81, 129), noise_seed=9), 224)
        once = embed(IMAGE_BACKBONE, tensor)
        twice = embed(IMAGE_BACKBONE, tensor * np.float32(2.0))
        np.testing.assert_array_equal(twice, once * np.float32(2.0))

    def test_video_backbone_dim(self):
        tensor = np.ones((299, 299, 3), dtype=np.float32)
        features = embed(VIDEO_FRAME_BACKBONE, tensor)
        assert features.shape == (2048,)
        assert np.all(np.isfinite(features))

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            embed(IMAGE_BACKBONE, np.zeros((64, 64, 3), dtype=np.float32))

    def test_registered_backbone_used(self):
        spec = BackboneSpec(id="unit-test-net", input_size=16, feature_dim=4)
        register_backbone("unit-test-net", lambda s, t: np.full(4, t.mean(), dtype=np.float32))
        out = embed(spec, np.full((16, 16, 3), 0.5, dtype=np.float32))
        np.testing.assert_allclose(out, 0.5)

    def test_unregistered_backbone(self):
        spec = BackboneSpec(id="never-registered", input_size=16, feature_dim=4)
        with pytest.raises(ConfigError):
            embed(spec, np.zeros((16, 16, 3), dtype=np.float32))

    def test_invalid_spec(self):
        with pytest.raises(ValidationError):
            stub_backbone(4, 1280)  # smaller than the pooling grid
        with pytest.raises(ValidationError):
            stub_backbone(224, 0)
