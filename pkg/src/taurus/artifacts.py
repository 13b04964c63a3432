"""Model artifact persistence: a directory holding model.json + weights.bin.

``model.json`` carries the metadata plus an index of tensors (name, shape,
byte offset); ``weights.bin`` is the concatenation of all tensors as
little-endian 32-bit IEEE floats in row-major order. Writing is fully
deterministic so retraining with the same seed produces byte-identical
artifacts.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ArtifactError

__all__ = ["SCHEMA_VERSION", "save_artifact", "load_artifact"]

SCHEMA_VERSION = 1

MODEL_JSON = "model.json"
WEIGHTS_BIN = "weights.bin"


def save_artifact(directory: str | Path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    """Write ``meta`` + ``tensors`` under ``directory`` (created if needed)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    index = []
    blobs = []
    offset = 0
    for name, tensor in tensors.items():
        arr = np.ascontiguousarray(tensor, dtype="<f4")
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += len(blobs[-1])

    doc = dict(meta)
    doc["schema_version"] = SCHEMA_VERSION
    doc["tensors"] = index
    (directory / WEIGHTS_BIN).write_bytes(b"".join(blobs))
    (directory / MODEL_JSON).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_artifact(directory: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read an artifact back; raises ArtifactError naming what failed."""
    directory = Path(directory)
    json_path = directory / MODEL_JSON
    bin_path = directory / WEIGHTS_BIN
    if not json_path.is_file():
        raise ArtifactError(f"{directory}: missing {MODEL_JSON}")
    if not bin_path.is_file():
        raise ArtifactError(f"{directory}: missing {WEIGHTS_BIN}")

    try:
        doc = json.loads(json_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{directory}: {MODEL_JSON} is not valid JSON: {exc}") from exc

    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ArtifactError(
            f"{directory}: unsupported schema_version {doc.get('schema_version')!r}"
        )
    index = doc.get("tensors")
    if not isinstance(index, list):
        raise ArtifactError(f"{directory}: {MODEL_JSON} has no tensor index")

    raw = bin_path.read_bytes()
    tensors: dict[str, np.ndarray] = {}
    expected_end = 0
    for item in index:
        name = item.get("name", "<unnamed>")
        try:
            shape = tuple(int(d) for d in item["shape"])
            offset = int(item["offset"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ArtifactError(f"{directory}: bad index entry for tensor {name!r}") from exc
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4
        if offset != expected_end:
            raise ArtifactError(
                f"{directory}: tensor {name!r} offset {offset} does not follow "
                f"the previous tensor (expected {expected_end})"
            )
        end = offset + nbytes
        if end > len(raw):
            raise ArtifactError(
                f"{directory}: {WEIGHTS_BIN} truncated while reading tensor {name!r} "
                f"(need {end} bytes, have {len(raw)})"
            )
        arr = np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise ArtifactError(f"{directory}: tensor {name!r} contains non-finite values")
        tensors[name] = arr
        expected_end = end
    if expected_end != len(raw):
        raise ArtifactError(
            f"{directory}: {WEIGHTS_BIN} has {len(raw) - expected_end} trailing bytes"
        )

    meta = {k: v for k, v in doc.items() if k not in ("tensors",)}
    return meta, tensors
