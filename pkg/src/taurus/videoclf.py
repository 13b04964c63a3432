"""Video behavior classification: masked GRU stack over per-frame features.

A clip becomes at most 200 frames, each embedded to 2048 features, padded
to a fixed 200x2048 matrix with a prefix mask. The trainable head is
GRU(16, full sequence) -> GRU(8, final state) -> dropout -> dense(8, ReLU)
-> dense(n_classes, softmax), 99,909 parameters at that configuration.

GRU convention: packed gates in z|r|n order, two bias vectors, and the
reset gate applied after the recurrent matrix product:

    z = sigmoid(x W_z + b_in_z + h U_z + b_rec_z)
    r = sigmoid(x W_r + b_in_r + h U_r + b_rec_r)
    n = tanh(x W_n + b_in_n + r * (h U_n + b_rec_n))
    h' = (1 - z) * n + z * h

Masked steps copy the hidden state unchanged, so padded rows can never
influence the output. Forward and backward (BPTT) are implemented here
directly in numpy; the test suite checks the gradients against central
finite differences.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from PIL import Image

from .artifacts import load_artifact, save_artifact
from .backbone import VIDEO_FRAME_BACKBONE, BackboneSpec, embed, preprocess, scale_pixels
from .errors import ArtifactError, ConfigError, MediaError, ValidationError
from .ingest import IMAGE_EXTENSIONS
from .taxonomy import (
    DEFAULT_THRESHOLD,
    Distribution,
    LabelSpace,
    Prediction,
    TaskId,
    top1,
)

__all__ = [
    "MAX_STEPS",
    "FRAME_FEATURE_DIM",
    "FrameSequence",
    "FeatureSequence",
    "GruLayerParams",
    "SequenceHead",
    "SequenceHyperParams",
    "SeqTrainingMeta",
    "sample_frames",
    "featurize",
    "make_feature_sequence",
    "gru_forward",
    "param_count",
    "build_sequence_head",
    "head_tensors",
    "head_loss_and_grads",
    "predict_video",
    "train_sequence_head",
    "load_frameset_dir",
    "decode_video_file",
    "register_frame_decoder",
    "save_sequence_head",
    "load_sequence_head",
]

MAX_STEPS = 200
FRAME_FEATURE_DIM = 2048


# ---------------------------------------------------------------------------
# sequence types


@dataclass(frozen=True)
class FrameSequence:
    """Decoded, preprocessed frames of one clip (already <= MAX_STEPS)."""

    frames: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not self.frames:
            raise ValidationError("a frame sequence needs at least one frame")
        if len(self.frames) > MAX_STEPS:
            raise ValidationError(
                f"at most {MAX_STEPS} frames allowed; run sample_frames first"
            )
        shapes = {tuple(f.shape) for f in self.frames}
        if len(shapes) != 1:
            raise ValidationError(f"frames disagree on shape: {sorted(shapes)}")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class FeatureSequence:
    """Fixed 200x2048 per-frame feature matrix with a prefix mask.

    ``featurize`` writes padded rows as exact zeros; consumers ignore any
    row whose mask bit is false, so the padded region never affects a
    prediction.
    """

    features: np.ndarray  # (MAX_STEPS, FRAME_FEATURE_DIM) float32
    mask: np.ndarray  # (MAX_STEPS,) bool
    valid_len: int

    def __post_init__(self) -> None:
        if self.features.shape != (MAX_STEPS, FRAME_FEATURE_DIM):
            raise ValidationError(
                f"features must have shape ({MAX_STEPS}, {FRAME_FEATURE_DIM}), "
                f"got {self.features.shape}"
            )
        if self.mask.shape != (MAX_STEPS,):
            raise ValidationError(f"mask must have shape ({MAX_STEPS},)")
        if not 1 <= self.valid_len <= MAX_STEPS:
            raise ValidationError(f"valid_len must lie in [1, {MAX_STEPS}]")
        expected = np.arange(MAX_STEPS) < self.valid_len
        if not np.array_equal(self.mask.astype(bool), expected):
            raise ValidationError("mask must be the prefix of length valid_len")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("features must be finite")


def sample_frames(frames: Sequence[np.ndarray], max_len: int = MAX_STEPS) -> FrameSequence:
    """Uniform temporal subsampling down to ``max_len`` frames.

    Keeps everything when the clip is short; otherwise picks indices
    floor(i * T / max_len) for i = 0..max_len-1.
    """
    total = len(frames)
    if total == 0:
        raise ValidationError("cannot sample an empty frame list")
    if total <= max_len:
        kept = list(frames)
    else:
        kept = [frames[(i * total) // max_len] for i in range(max_len)]
    return FrameSequence(frames=tuple(kept))


def make_feature_sequence(valid_features: np.ndarray) -> FeatureSequence:
    """Zero-pad a (T, 2048) feature block into a FeatureSequence."""
    valid = np.asarray(valid_features, dtype=np.float32)
    if valid.ndim != 2 or valid.shape[1] != FRAME_FEATURE_DIM or not 1 <= valid.shape[0] <= MAX_STEPS:
        raise ValidationError(
            f"expected (T, {FRAME_FEATURE_DIM}) with 1 <= T <= {MAX_STEPS}, got {valid.shape}"
        )
    t = valid.shape[0]
    features = np.zeros((MAX_STEPS, FRAME_FEATURE_DIM), dtype=np.float32)
    features[:t] = valid
    mask = np.arange(MAX_STEPS) < t
    return FeatureSequence(features=features, mask=mask, valid_len=t)


def featurize(seq: FrameSequence, backbone: BackboneSpec = VIDEO_FRAME_BACKBONE) -> FeatureSequence:
    """Embed every frame; pad the rest of the 200 rows with exact zeros."""
    if backbone.feature_dim != FRAME_FEATURE_DIM:
        raise ConfigError(
            f"video featurizer needs a {FRAME_FEATURE_DIM}-dim backbone, "
            f"got {backbone.feature_dim} ({backbone.id})"
        )
    rows = np.stack([embed(backbone, frame) for frame in seq.frames])
    return make_feature_sequence(rows)


# ---------------------------------------------------------------------------
# GRU layer


@dataclass(frozen=True)
class GruLayerParams:
    """One GRU layer; kernels pack the z|r|n gates side by side."""

    input_dim: int
    units: int
    kernel: np.ndarray  # W: (input_dim, 3*units)
    recurrent: np.ndarray  # U: (units, 3*units)
    bias_in: np.ndarray  # (3*units,)
    bias_rec: np.ndarray  # (3*units,)

    def __post_init__(self) -> None:
        d, u = self.input_dim, self.units
        if self.kernel.shape != (d, 3 * u):
            raise ValidationError(f"kernel shape {self.kernel.shape} != ({d}, {3 * u})")
        if self.recurrent.shape != (u, 3 * u):
            raise ValidationError(f"recurrent shape {self.recurrent.shape} != ({u}, {3 * u})")
        if self.bias_in.shape != (3 * u,) or self.bias_rec.shape != (3 * u,):
            raise ValidationError(f"biases must have shape ({3 * u},)")

    @property
    def param_count(self) -> int:
        d, u = self.input_dim, self.units
        return 3 * (d * u + u * u + 2 * u)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _gru_forward_core(
    params: GruLayerParams,
    x: np.ndarray,
    mask: np.ndarray,
    h0: np.ndarray | None = None,
    want_cache: bool = False,
):
    """Batched masked GRU pass.

    x: (B, T, d) float64, mask: (B, T) bool. Returns (states, h_final,
    cache) where states[b, t] is the hidden state after step t (masked
    steps carry the previous state forward).
    """
    batch, steps, d = x.shape
    if d != params.input_dim:
        raise ValidationError(f"input dim {d} != layer input_dim {params.input_dim}")
    if mask.shape != (batch, steps):
        raise ValidationError(f"mask shape {mask.shape} != {(batch, steps)}")
    u = params.units
    kernel = params.kernel.astype(np.float64, copy=False)
    recurrent = params.recurrent.astype(np.float64, copy=False)
    bias_in = params.bias_in.astype(np.float64, copy=False)
    bias_rec = params.bias_rec.astype(np.float64, copy=False)

    # Input-side projections for all steps at once; the loop only carries h.
    x_proj = x.reshape(batch * steps, d) @ kernel
    x_proj = x_proj.reshape(batch, steps, 3 * u) + bias_in

    h = np.zeros((batch, u)) if h0 is None else np.array(h0, dtype=np.float64)
    states = np.empty((batch, steps, u))
    cache = None
    if want_cache:
        cache = {
            "h_prev": np.empty((batch, steps, u)),
            "z": np.empty((batch, steps, u)),
            "r": np.empty((batch, steps, u)),
            "n": np.empty((batch, steps, u)),
            "s": np.empty((batch, steps, u)),
            "x": x,
            "mask": mask,
        }
    for t in range(steps):
        a_rec = h @ recurrent + bias_rec
        a_in = x_proj[:, t, :]
        z = _sigmoid(a_in[:, :u] + a_rec[:, :u])
        r = _sigmoid(a_in[:, u : 2 * u] + a_rec[:, u : 2 * u])
        s = a_rec[:, 2 * u :]
        n = np.tanh(a_in[:, 2 * u :] + r * s)
        h_new = (1.0 - z) * n + z * h
        m = mask[:, t : t + 1]
        if want_cache:
            cache["h_prev"][:, t] = h
            cache["z"][:, t] = z
            cache["r"][:, t] = r
            cache["n"][:, t] = n
            cache["s"][:, t] = s
        h = np.where(m, h_new, h)
        states[:, t] = h
    return states, h, cache


def _gru_backward_core(
    params: GruLayerParams,
    cache: dict,
    d_states: np.ndarray | None,
    d_h_final: np.ndarray | None,
):
    """BPTT for one layer; returns (d_x, grads dict with W/U/b_in/b_rec)."""
    x = cache["x"]
    mask = cache["mask"]
    batch, steps, d = x.shape
    u = params.units
    kernel = params.kernel.astype(np.float64, copy=False)
    recurrent = params.recurrent.astype(np.float64, copy=False)

    da_in_all = np.zeros((batch, steps, 3 * u))
    da_rec_all = np.zeros((batch, steps, 3 * u))
    dh = np.zeros((batch, u)) if d_h_final is None else np.array(d_h_final, dtype=np.float64)

    for t in range(steps - 1, -1, -1):
        dh_eff = dh if d_states is None else dh + d_states[:, t]
        h_prev = cache["h_prev"][:, t]
        z = cache["z"][:, t]
        r = cache["r"][:, t]
        n = cache["n"][:, t]
        s = cache["s"][:, t]

        dz = dh_eff * (h_prev - n)
        dn = dh_eff * (1.0 - z)
        da_n = dn * (1.0 - n * n)
        ds = da_n * r
        dr = da_n * s
        da_z = dz * z * (1.0 - z)
        da_r = dr * r * (1.0 - r)

        da_in = np.concatenate([da_z, da_r, da_n], axis=1)
        da_rec = np.concatenate([da_z, da_r, ds], axis=1)
        dh_prev = dh_eff * z + da_rec @ recurrent.T

        m = mask[:, t : t + 1]
        da_in_all[:, t] = np.where(m, da_in, 0.0)
        da_rec_all[:, t] = np.where(m, da_rec, 0.0)
        dh = np.where(m, dh_prev, dh_eff)

    flat = lambda a: a.reshape(batch * steps, -1)
    grads = {
        "W": flat(x).T @ flat(da_in_all),
        "U": flat(cache["h_prev"]).T @ flat(da_rec_all),
        "b_in": da_in_all.sum(axis=(0, 1)),
        "b_rec": da_rec_all.sum(axis=(0, 1)),
    }
    d_x = flat(da_in_all) @ kernel.T
    return d_x.reshape(batch, steps, d), grads


def gru_forward(
    params: GruLayerParams,
    inputs: np.ndarray,
    mask: Sequence[bool] | np.ndarray | None = None,
    h0: np.ndarray | None = None,
) -> np.ndarray:
    """Run one sequence (T, input_dim) through the layer; returns (T, units).

    Masked steps copy the previous hidden state unchanged. ``h0`` defaults
    to the zero vector.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("inputs must be a (T, input_dim) matrix")
    steps = x.shape[0]
    m = np.ones(steps, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if m.shape != (steps,):
        raise ValidationError(f"mask length {m.shape} does not match {steps} steps")
    h_start = None if h0 is None else np.asarray(h0, dtype=np.float64).reshape(1, params.units)
    states, _, _ = _gru_forward_core(params, x[None], m[None], h0=h_start)
    return states[0]


# ---------------------------------------------------------------------------
# sequence head


@dataclass(frozen=True)
class SeqTrainingMeta:
    epochs: int
    learning_rate: float
    dropout_rate: float
    batch_size: int
    seed: int
    final_loss: float

    def to_json_obj(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "dropout_rate": self.dropout_rate,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "final_loss": self.final_loss,
        }


@dataclass(frozen=True)
class SequenceHead:
    """GRU stack + dense classifier over padded feature sequences."""

    gru1: GruLayerParams
    gru2: GruLayerParams
    dropout_rate: float
    dense1_kernel: np.ndarray
    dense1_bias: np.ndarray
    dense2_kernel: np.ndarray
    dense2_bias: np.ndarray
    space: LabelSpace
    backbone_id: str = ""
    training: SeqTrainingMeta | None = None

    def __post_init__(self) -> None:
        if self.gru2.input_dim != self.gru1.units:
            raise ValidationError("gru2 input_dim must equal gru1 units")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValidationError("dropout_rate must lie in [0, 1)")
        hidden = self.dense1_kernel.shape
        if hidden != (self.gru2.units, self.dense1_bias.shape[0]):
            raise ValidationError(f"dense1 kernel shape {hidden} inconsistent")
        n_classes = len(self.space)
        if self.dense2_kernel.shape != (self.dense1_bias.shape[0], n_classes):
            raise ValidationError(
                f"dense2 kernel shape {self.dense2_kernel.shape} != "
                f"({self.dense1_bias.shape[0]}, {n_classes})"
            )
        if self.dense2_bias.shape != (n_classes,):
            raise ValidationError("dense2 bias shape mismatch")


def param_count(head: SequenceHead) -> int:
    """Total trainable parameters: GRU layers use 3(d*u + u^2 + 2u)."""
    dense1 = head.dense1_kernel.size + head.dense1_bias.size
    dense2 = head.dense2_kernel.size + head.dense2_bias.size
    return head.gru1.param_count + head.gru2.param_count + int(dense1) + int(dense2)


INIT_SCALE = 0.05


def build_sequence_head(
    space: LabelSpace,
    input_dim: int = FRAME_FEATURE_DIM,
    gru1_units: int = 16,
    gru2_units: int = 8,
    dense_units: int = 8,
    dropout_rate: float = 0.4,
    seed: int = 0,
    backbone_id: str = VIDEO_FRAME_BACKBONE.id,
    dtype: np.dtype = np.float32,
) -> SequenceHead:
    """Initialize the head uniformly in [-0.05, 0.05] from a seeded generator."""
    rng = np.random.Generator(np.random.PCG64(seed))
    draw = lambda *shape: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape).astype(dtype)
    n_classes = len(space)
    gru1 = GruLayerParams(
        input_dim=input_dim,
        units=gru1_units,
        kernel=draw(input_dim, 3 * gru1_units),
        recurrent=draw(gru1_units, 3 * gru1_units),
        bias_in=draw(3 * gru1_units),
        bias_rec=draw(3 * gru1_units),
    )
    gru2 = GruLayerParams(
        input_dim=gru1_units,
        units=gru2_units,
        kernel=draw(gru1_units, 3 * gru2_units),
        recurrent=draw(gru2_units, 3 * gru2_units),
        bias_in=draw(3 * gru2_units),
        bias_rec=draw(3 * gru2_units),
    )
    return SequenceHead(
        gru1=gru1,
        gru2=gru2,
        dropout_rate=dropout_rate,
        dense1_kernel=draw(gru2_units, dense_units),
        dense1_bias=draw(dense_units),
        dense2_kernel=draw(dense_units, n_classes),
        dense2_bias=draw(n_classes),
        space=space,
        backbone_id=backbone_id,
    )


TENSOR_NAMES = (
    "gru1.W", "gru1.U", "gru1.b_in", "gru1.b_rec",
    "gru2.W", "gru2.U", "gru2.b_in", "gru2.b_rec",
    "dense1.W", "dense1.b", "dense2.W", "dense2.b",
)


def head_tensors(head: SequenceHead) -> dict[str, np.ndarray]:
    """All trainable tensors keyed by their artifact names."""
    return {
        "gru1.W": head.gru1.kernel,
        "gru1.U": head.gru1.recurrent,
        "gru1.b_in": head.gru1.bias_in,
        "gru1.b_rec": head.gru1.bias_rec,
        "gru2.W": head.gru2.kernel,
        "gru2.U": head.gru2.recurrent,
        "gru2.b_in": head.gru2.bias_in,
        "gru2.b_rec": head.gru2.bias_rec,
        "dense1.W": head.dense1_kernel,
        "dense1.b": head.dense1_bias,
        "dense2.W": head.dense2_kernel,
        "dense2.b": head.dense2_bias,
    }


def _head_with_tensors(head: SequenceHead, tensors: dict[str, np.ndarray],
                       training: SeqTrainingMeta | None = None) -> SequenceHead:
    gru1 = GruLayerParams(
        input_dim=head.gru1.input_dim, units=head.gru1.units,
        kernel=tensors["gru1.W"], recurrent=tensors["gru1.U"],
        bias_in=tensors["gru1.b_in"], bias_rec=tensors["gru1.b_rec"],
    )
    gru2 = GruLayerParams(
        input_dim=head.gru2.input_dim, units=head.gru2.units,
        kernel=tensors["gru2.W"], recurrent=tensors["gru2.U"],
        bias_in=tensors["gru2.b_in"], bias_rec=tensors["gru2.b_rec"],
    )
    return SequenceHead(
        gru1=gru1, gru2=gru2, dropout_rate=head.dropout_rate,
        dense1_kernel=tensors["dense1.W"], dense1_bias=tensors["dense1.b"],
        dense2_kernel=tensors["dense2.W"], dense2_bias=tensors["dense2.b"],
        space=head.space, backbone_id=head.backbone_id,
        training=training if training is not None else head.training,
    )


def _forward_head(head: SequenceHead, x: np.ndarray, mask: np.ndarray,
                  dropout_mask: np.ndarray | None, want_cache: bool):
    states1, _, cache1 = _gru_forward_core(head.gru1, x, mask, want_cache=want_cache)
    _, h2, cache2 = _gru_forward_core(head.gru2, states1, mask, want_cache=want_cache)
    dropped = h2 if dropout_mask is None else h2 * dropout_mask
    w1 = head.dense1_kernel.astype(np.float64, copy=False)
    b1 = head.dense1_bias.astype(np.float64, copy=False)
    w2 = head.dense2_kernel.astype(np.float64, copy=False)
    b2 = head.dense2_bias.astype(np.float64, copy=False)
    a1 = dropped @ w1 + b1
    r1 = np.maximum(a1, 0.0)
    logits = r1 @ w2 + b2
    ctx = {
        "cache1": cache1, "cache2": cache2, "h2": h2,
        "dropped": dropped, "a1": a1, "r1": r1,
    }
    return logits, ctx


def _softmax_xent(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(n), labels]))
    probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    probs[np.arange(n), labels] -= 1.0
    probs /= n
    return loss, probs


def head_loss_and_grads(
    head: SequenceHead,
    features: np.ndarray,
    mask: np.ndarray,
    labels: Sequence[int] | np.ndarray,
    dropout_mask: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over a batch and its gradient for every tensor.

    features: (B, T, input_dim); mask: (B, T) prefix booleans; labels:
    (B,) class indices. ``dropout_mask`` (if given) multiplies the gru2
    output, which is how training injects inverted dropout; gradient
    checking leaves it None.
    """
    x = np.asarray(features, dtype=np.float64)
    m = np.asarray(mask, dtype=bool)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 3:
        raise ValidationError("features must be (B, T, d)")
    logits, ctx = _forward_head(head, x, m, dropout_mask, want_cache=True)
    loss, d_logits = _softmax_xent(logits, y)

    r1 = ctx["r1"]
    a1 = ctx["a1"]
    dropped = ctx["dropped"]
    w1 = head.dense1_kernel.astype(np.float64, copy=False)
    w2 = head.dense2_kernel.astype(np.float64, copy=False)

    grads: dict[str, np.ndarray] = {}
    grads["dense2.W"] = r1.T @ d_logits
    grads["dense2.b"] = d_logits.sum(axis=0)
    d_r1 = d_logits @ w2.T
    d_a1 = d_r1 * (a1 > 0.0)
    grads["dense1.W"] = dropped.T @ d_a1
    grads["dense1.b"] = d_a1.sum(axis=0)
    d_dropped = d_a1 @ w1.T
    d_h2 = d_dropped if dropout_mask is None else d_dropped * dropout_mask

    d_states1, g2 = _gru_backward_core(head.gru2, ctx["cache2"], None, d_h2)
    _, g1 = _gru_backward_core(head.gru1, ctx["cache1"], d_states1, None)
    grads.update({f"gru2.{k}": v for k, v in g2.items()})
    grads.update({f"gru1.{k}": v for k, v in g1.items()})
    return loss, grads


def head_logits(head: SequenceHead, features: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Inference-mode logits for a batch (dropout is identity)."""
    x = np.asarray(features, dtype=np.float64)
    m = np.asarray(mask, dtype=bool)
    logits, _ = _forward_head(head, x, m, None, want_cache=False)
    return logits


def predict_video(
    head: SequenceHead, fs: FeatureSequence, threshold: float = DEFAULT_THRESHOLD
) -> Prediction:
    """Masked GRU stack -> dense layers -> softmax -> top-1."""
    if head.gru1.input_dim != FRAME_FEATURE_DIM:
        raise ConfigError("this head was not built for 2048-dim frame features")
    # Prefix masking means steps past valid_len copy the state, so the
    # padded tail can be skipped outright.
    t = fs.valid_len
    x = fs.features[:t].astype(np.float64)[None]
    m = np.ones((1, t), dtype=bool)
    logits, _ = _forward_head(head, x, m, None, want_cache=False)
    shifted = logits[0] - logits[0].max()
    probs = np.exp(shifted) / np.exp(shifted).sum()
    return top1(Distribution(tuple(probs)), head.space, threshold)


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class SequenceHyperParams:
    learning_rate: float = 0.2
    epochs: int = 200
    dropout_rate: float = 0.4
    seed: int = 0
    batch_size: int = 10

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValidationError("dropout_rate must lie in [0, 1)")
        if self.batch_size < 0:
            raise ValidationError("batch_size must be >= 0 (0 = full batch)")


def train_sequence_head(
    dataset: Sequence[tuple[FeatureSequence, int]],
    space: LabelSpace,
    hp: SequenceHyperParams = SequenceHyperParams(),
    on_epoch: Callable[[int, float], None] | None = None,
) -> SequenceHead:
    """Train the Figure-architecture head by mini-batch BPTT.

    Deterministic given ``hp.seed`` and the dataset order: the same seed
    drives both the per-epoch shuffle and the dropout masks.
    """
    if not dataset:
        raise ValidationError("training dataset must be non-empty")
    n_classes = len(space)
    labels = np.array([label for _, label in dataset], dtype=np.int64)
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise ValidationError(f"label indices must lie in [0, {n_classes})")

    # Sequences share a prefix-mask convention, so the batch can be trimmed
    # to the longest valid prefix without changing any output.
    t_max = max(fs.valid_len for fs, _ in dataset)
    x_all = np.stack([fs.features[:t_max] for fs, _ in dataset]).astype(np.float64)
    m_all = np.stack([fs.mask[:t_max] for fs, _ in dataset])

    head = build_sequence_head(
        space,
        dropout_rate=hp.dropout_rate,
        seed=hp.seed,
        dtype=np.float64,
    )
    params = {name: np.array(t, dtype=np.float64) for name, t in head_tensors(head).items()}
    rng = np.random.Generator(np.random.PCG64(hp.seed))

    total = len(dataset)
    batch = total if hp.batch_size == 0 else min(hp.batch_size, total)
    u2 = head.gru2.units
    for epoch in range(hp.epochs):
        order = rng.permutation(total)
        epoch_loss = 0.0
        for start in range(0, total, batch):
            idx = order[start : start + batch]
            current = _head_with_tensors(head, params)
            dropout_mask = None
            if hp.dropout_rate > 0.0:
                keep = rng.random((len(idx), u2)) >= hp.dropout_rate
                dropout_mask = keep / (1.0 - hp.dropout_rate)
            loss, grads = head_loss_and_grads(
                current, x_all[idx], m_all[idx], labels[idx], dropout_mask
            )
            for name in params:
                params[name] -= hp.learning_rate * grads[name]
            epoch_loss += loss * len(idx)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss / total)

    final_head = _head_with_tensors(head, params)
    final_loss, _ = head_loss_and_grads(final_head, x_all, m_all, labels, None)
    cast = {name: arr.astype(np.float32) for name, arr in params.items()}
    meta = SeqTrainingMeta(
        epochs=hp.epochs,
        learning_rate=hp.learning_rate,
        dropout_rate=hp.dropout_rate,
        batch_size=hp.batch_size,
        seed=hp.seed,
        final_loss=final_loss,
    )
    return _head_with_tensors(head, cast, training=meta)


# ---------------------------------------------------------------------------
# frame input paths


_FRAME_DECODER: Callable[[Path], list[np.ndarray]] | None = None


def register_frame_decoder(fn: Callable[[Path], list[np.ndarray]]) -> None:
    """Install a decoder for container video files (raw uint8 HxWx3 frames)."""
    global _FRAME_DECODER
    _FRAME_DECODER = fn


def _natural_key(name: str) -> tuple:
    return tuple(int(part) if part.isdigit() else part for part in re.split(r"(\d+)", name))


def load_frameset_dir(directory: str | Path, backbone: BackboneSpec = VIDEO_FRAME_BACKBONE) -> FrameSequence:
    """Read a directory of numerically-ordered frame images as one clip."""
    directory = Path(directory)
    if not directory.is_dir():
        raise MediaError(f"frameset directory not found: {directory}")
    paths = sorted(
        (p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS),
        key=lambda p: _natural_key(p.name),
    )
    if not paths:
        raise MediaError(f"frameset directory holds no frame images: {directory}")
    frames = [preprocess(p.read_bytes(), backbone.input_size) for p in paths]
    return sample_frames(frames)


def decode_video_file(path: str | Path, backbone: BackboneSpec = VIDEO_FRAME_BACKBONE) -> FrameSequence:
    """Decode a container video via the registered decoder, then preprocess."""
    if _FRAME_DECODER is None:
        raise MediaError(
            "no container-video decoder registered; supply a frameset directory "
            "or call register_frame_decoder"
        )
    raw_frames = _FRAME_DECODER(Path(path))
    if not raw_frames:
        raise MediaError(f"decoder produced no frames for {path}")
    size = backbone.input_size
    frames = []
    for raw in raw_frames:
        img = Image.fromarray(np.asarray(raw, dtype=np.uint8)).convert("RGB")
        if img.size != (size, size):
            img = img.resize((size, size), Image.BILINEAR)
        frames.append(scale_pixels(np.asarray(img)))
    return sample_frames(frames)


# ---------------------------------------------------------------------------
# artifacts


def save_sequence_head(head: SequenceHead, directory: str | Path) -> None:
    """Persist as model.json + weights.bin with gru1.*/gru2.*/dense*.* tensors."""
    meta = {
        "kind": "sequence_head",
        "task": head.space.task.value,
        "labels": list(head.space.labels),
        "backbone_id": head.backbone_id,
        "feature_dim": head.gru1.input_dim,
        "dropout_rate": head.dropout_rate,
        "training": head.training.to_json_obj() if head.training else None,
    }
    save_artifact(directory, meta, head_tensors(head))


def load_sequence_head(directory: str | Path) -> SequenceHead:
    meta, tensors = load_artifact(directory)
    if meta.get("kind") != "sequence_head":
        raise ArtifactError(
            f"{directory}: expected a sequence_head artifact, got {meta.get('kind')!r}"
        )
    missing = [name for name in TENSOR_NAMES if name not in tensors]
    if missing:
        raise ArtifactError(f"{directory}: artifact is missing tensors {missing}")
    try:
        space = LabelSpace(task=TaskId(meta["task"]), labels=tuple(meta["labels"]))
        training = SeqTrainingMeta(**meta["training"]) if meta.get("training") else None
        gru1 = GruLayerParams(
            input_dim=tensors["gru1.W"].shape[0],
            units=tensors["gru1.U"].shape[0],
            kernel=tensors["gru1.W"],
            recurrent=tensors["gru1.U"],
            bias_in=tensors["gru1.b_in"],
            bias_rec=tensors["gru1.b_rec"],
        )
        gru2 = GruLayerParams(
            input_dim=tensors["gru2.W"].shape[0],
            units=tensors["gru2.U"].shape[0],
            kernel=tensors["gru2.W"],
            recurrent=tensors["gru2.U"],
            bias_in=tensors["gru2.b_in"],
            bias_rec=tensors["gru2.b_rec"],
        )
        return SequenceHead(
            gru1=gru1,
            gru2=gru2,
            dropout_rate=float(meta.get("dropout_rate", 0.0)),
            dense1_kernel=tensors["dense1.W"],
            dense1_bias=tensors["dense1.b"],
            dense2_kernel=tensors["dense2.W"],
            dense2_bias=tensors["dense2.b"],
            space=space,
            backbone_id=str(meta.get("backbone_id", "")),
            training=training,
        )
    except (KeyError, TypeError, ValueError, ValidationError) as exc:
        raise ArtifactError(f"{directory}: invalid sequence_head metadata: {exc}") from exc
