"""REST inference service with persisted diagnostic case records.

Models load once at startup from a directory of artifacts (one
subdirectory per model). Every diagnostic session is a case: uploads are
stored content-addressed under the case directory, predictions and dose
plans append to a JSON-lines log, and replaying that log reconstructs the
in-memory store exactly.
"""

from __future__ import annotations

import io
import json
import os
import secrets
import tempfile
import threading
import zipfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from hashlib import sha256
from pathlib import Path

from fastapi import FastAPI, File, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import dosage, imageclf, videoclf
from .artifacts import load_artifact
from .backbone import BackboneSpec, stub_backbone
from .errors import (
    ArtifactError,
    ConfigError,
    ContraindicationError,
    DataError,
    DosageError,
    ManualWeighingRequired,
    MediaError,
    NoRuleError,
    TaurusError,
    ValidationError,
)
from .taxonomy import CANONICAL_LABELS, DEFAULT_THRESHOLD, Prediction, TaskId, canonical_space

__all__ = [
    "MODEL_DIR_ENV",
    "IMAGE_UPLOAD_LIMIT",
    "VIDEO_UPLOAD_LIMIT",
    "CaseRecord",
    "CaseStore",
    "LoadedModel",
    "ModelRegistry",
    "load_models",
    "create_app",
]

MODEL_DIR_ENV = "TAURUS_MODEL_DIR"

IMAGE_UPLOAD_LIMIT = 10 * 1024 * 1024
VIDEO_UPLOAD_LIMIT = 100 * 1024 * 1024

PREDICT_SLUGS = {
    "breed": TaskId.BREED,
    "disease-image": TaskId.DISEASE_IMAGE,
    "age": TaskId.AGE_GROUP,
    "weight": TaskId.WEIGHT_GROUP,
}

_STATUS_BY_ERROR: list[tuple[type, int]] = [
    (NoRuleError, 404),
    (ContraindicationError, 409),
    (ManualWeighingRequired, 422),
    (DosageError, 422),
    (MediaError, 422),
    (DataError, 422),
    (ValidationError, 422),
    (ConfigError, 500),
    (ArtifactError, 500),
    (TaurusError, 500),
]


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# model registry


@dataclass(frozen=True)
class LoadedModel:
    task: TaskId
    kind: str  # "image_head" | "sequence_head"
    model: object
    backbone: BackboneSpec
    path: str
    loaded_at: str


@dataclass(frozen=True)
class ModelRegistry:
    models: dict[TaskId, LoadedModel] = field(default_factory=dict)

    def get(self, task: TaskId) -> LoadedModel | None:
        return self.models.get(task)

    @property
    def tasks(self) -> list[str]:
        return sorted(m.task.value for m in self.models.values())


def _resolve_backbone(backbone_id: str, feature_dim: int) -> BackboneSpec:
    if backbone_id.startswith("stub-"):
        try:
            _, size, dim = backbone_id.split("-")
            spec = stub_backbone(int(size), int(dim))
        except (ValueError, ValidationError) as exc:
            raise ArtifactError(f"unparseable stub backbone id {backbone_id!r}") from exc
        if spec.feature_dim != feature_dim:
            raise ArtifactError(
                f"backbone {backbone_id!r} feature_dim {spec.feature_dim} "
                f"does not match the artifact's {feature_dim}"
            )
        return spec
    raise ArtifactError(
        f"backbone {backbone_id!r} is not a stub; register it and extend "
        f"_resolve_backbone before serving this artifact"
    )


def load_models(directory: str | Path) -> ModelRegistry:
    """Load every artifact subdirectory; validate against the canonical taxonomy."""
    directory = Path(directory)
    models: dict[TaskId, LoadedModel] = {}
    if not directory.is_dir():
        return ModelRegistry(models)
    for sub in sorted(p for p in directory.iterdir() if p.is_dir()):
        if not (sub / "model.json").is_file():
            continue
        meta, _ = load_artifact(sub)
        kind = meta.get("kind")
        if kind == "image_head":
            model = imageclf.load_head(sub)
            space = model.space
            backbone_id = model.backbone_id
            feature_dim = model.feature_dim
        elif kind == "sequence_head":
            model = videoclf.load_sequence_head(sub)
            space = model.space
            backbone_id = model.backbone_id
            feature_dim = model.gru1.input_dim
        else:
            raise ArtifactError(f"{sub}: unknown artifact kind {kind!r}")
        expected = CANONICAL_LABELS[space.task]
        if space.labels != expected:
            raise ArtifactError(
                f"{sub}: label space {list(space.labels)} does not match the "
                f"{space.task.value} taxonomy {list(expected)}"
            )
        if space.task in models:
            raise ArtifactError(
                f"{sub}: duplicate artifact for task {space.task.value} "
                f"(already loaded from {models[space.task].path})"
            )
        models[space.task] = LoadedModel(
            task=space.task,
            kind=kind,
            model=model,
            backbone=_resolve_backbone(backbone_id, feature_dim),
            path=str(sub),
            loaded_at=_utc_now(),
        )
    return ModelRegistry(models)


# ---------------------------------------------------------------------------
# case store


@dataclass
class CaseRecord:
    case_id: str
    created_at: str
    media: list[dict] = field(default_factory=list)
    predictions: list[dict] = field(default_factory=list)
    dose_plan: dict | None = None

    def to_json_obj(self) -> dict:
        return {
            "case_id": self.case_id,
            "created_at": self.created_at,
            "media": list(self.media),
            "predictions": list(self.predictions),
            "dose_plan": self.dose_plan,
        }


class CaseStore:
    """Append-only JSONL event log plus content-addressed upload blobs.

    A single lock serializes writers; each event is one line written in a
    single call, so a crash can truncate at most the trailing line and a
    replay of the intact prefix reproduces a consistent store.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.blob_dir = self.directory / "blobs"
        self.log_path = self.directory / "cases.log"
        self.directory.mkdir(parents=True, exist_ok=True)
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._cases: dict[str, CaseRecord] = {}
        self._replay()

    def _replay(self) -> None:
        if not self.log_path.is_file():
            return
        with self.log_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    self._apply(json.loads(line))

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "case_created":
            record = CaseRecord(case_id=event["case_id"], created_at=event["created_at"])
            self._cases[record.case_id] = record
            return
        record = self._cases[event["case_id"]]
        if kind == "media_added":
            record.media.append(event["media"])
        elif kind == "prediction_added":
            record.predictions.append(event["prediction"])
        elif kind == "dose_attached":
            record.dose_plan = event["dose_plan"]
        else:
            raise ValidationError(f"unknown case log event {kind!r}")

    def _append(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True) + "\n"
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
        self._apply(event)

    def snapshot(self) -> dict[str, dict]:
        """Immutable view of every case, for tests and replay comparison."""
        with self._lock:
            return {cid: rec.to_json_obj() for cid, rec in self._cases.items()}

    def get(self, case_id: str) -> CaseRecord | None:
        with self._lock:
            return self._cases.get(case_id)

    def open_case(self, case_id: str | None = None) -> CaseRecord:
        """Fetch the named case, or create a fresh one when id is None."""
        with self._lock:
            if case_id is not None:
                record = self._cases.get(case_id)
                if record is None:
                    raise KeyError(case_id)
                return record
            new_id = secrets.token_hex(16)
            self._append(
                {"event": "case_created", "case_id": new_id, "created_at": _utc_now()}
            )
            return self._cases[new_id]

    def store_blob(self, data: bytes) -> str:
        digest = sha256(data).hexdigest()
        target = self.blob_dir / digest
        if not target.exists():
            fd, tmp = tempfile.mkstemp(dir=self.blob_dir, prefix=".tmp-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                os.replace(tmp, target)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
        return digest

    def add_media(self, case_id: str, digest: str, kind: str, size: int) -> None:
        with self._lock:
            self._append(
                {
                    "event": "media_added",
                    "case_id": case_id,
                    "media": {"digest": digest, "kind": kind, "size": size},
                }
            )

    def add_prediction(self, case_id: str, prediction: Prediction) -> None:
        with self._lock:
            self._append(
                {
                    "event": "prediction_added",
                    "case_id": case_id,
                    "prediction": prediction.to_json_obj(),
                }
            )

    def attach_dose_plan(self, case_id: str, plan: dosage.DosePlan) -> None:
        with self._lock:
            self._append(
                {
                    "event": "dose_attached",
                    "case_id": case_id,
                    "dose_plan": plan.to_json_obj(),
                }
            )


# ---------------------------------------------------------------------------
# HTTP app


class DosageRequest(BaseModel):
    disease: str
    age_band: str
    weight_group: str
    case_id: str | None = None


def _error_response(status: int, message: str, code: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message, "code": code})


def _http_error(status: int, message: str, code: str) -> Exception:
    # Raised inside handlers; converted by the TaurusError handler below.
    err = _ServiceHTTPError(message)
    err.status = status
    err.code = code
    return err


class _ServiceHTTPError(TaurusError):
    status = 500
    code = "error"


def create_app(
    model_dir: str | Path | None = None,
    registry_path: str | Path | None = None,
    cases_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
    thresholds: dict[TaskId, float] | None = None,
) -> FastAPI:
    """Build the service around one model directory and one case store."""
    if model_dir is None:
        model_dir = os.environ.get(MODEL_DIR_ENV)
    registry = load_models(model_dir) if model_dir else ModelRegistry({})
    drug_rules = dosage.load_registry(
        registry_path if registry_path is not None else dosage.sample_registry_path()
    )
    if cases_dir is None:
        cases_dir = Path(tempfile.mkdtemp(prefix="taurus-cases-"))
    store = CaseStore(cases_dir)
    task_thresholds = {task: DEFAULT_THRESHOLD for task in TaskId}
    if thresholds:
        task_thresholds.update(thresholds)

    app = FastAPI(title="taurus diagnostic service", version="0.1.0")
    app.state.registry = registry
    app.state.store = store

    @app.exception_handler(TaurusError)
    async def taurus_error_handler(request: Request, exc: TaurusError):
        if isinstance(exc, _ServiceHTTPError):
            return _error_response(exc.status, str(exc), exc.code)
        for etype, status in _STATUS_BY_ERROR:
            if isinstance(exc, etype):
                return _error_response(status, str(exc), exc.code)
        return _error_response(500, str(exc), "error")

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return _error_response(422, str(exc.errors()[:1]), "validation")

    @app.exception_handler(StarletteHTTPException)
    async def http_error_handler(request: Request, exc: StarletteHTTPException):
        # Keeps framework-raised statuses (404 routes, 405 methods, ...) on
        # the {"error", "code"} contract.
        codes = {404: "not_found", 405: "method_not_allowed", 413: "too_large"}
        return _error_response(
            exc.status_code, str(exc.detail), codes.get(exc.status_code, "http_error")
        )

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "tasks": registry.tasks}

    @app.get("/api/v1/labels/{task}")
    async def labels(task: str):
        try:
            task_id = TaskId(task)
        except ValueError:
            raise _http_error(404, f"unknown task {task!r}", "not_found")
        loaded = registry.get(task_id)
        space = loaded.model.space if loaded else canonical_space(task_id)
        return space.to_json_obj()

    def _open_case(request: Request) -> CaseRecord:
        case_id = request.headers.get("X-Case-Id")
        try:
            return store.open_case(case_id)
        except KeyError:
            raise _http_error(404, f"unknown case id {case_id!r}", "not_found")

    async def _read_limited(file: UploadFile, limit: int) -> bytes:
        data = await file.read(limit + 1)
        if len(data) > limit:
            raise _http_error(413, f"upload exceeds the {limit} byte limit", "too_large")
        return data

    def _predict_response(case: CaseRecord, prediction: Prediction) -> JSONResponse:
        body = prediction.to_json_obj()
        body["case_id"] = case.case_id
        return JSONResponse(content=body, headers={"X-Case-Id": case.case_id})

    @app.post("/api/v1/predict/disease-video")
    async def predict_video_endpoint(request: Request, file: UploadFile = File(...)):
        loaded = registry.get(TaskId.BEHAVIOR_VIDEO)
        if loaded is None:
            raise _http_error(503, "no model loaded for task behavior_video", "no_model")
        data = await _read_limited(file, VIDEO_UPLOAD_LIMIT)
        case = _open_case(request)
        frames = _decode_video_upload(data, loaded.backbone)
        fs = videoclf.featurize(frames, loaded.backbone)
        prediction = videoclf.predict_video(
            loaded.model, fs, task_thresholds[TaskId.BEHAVIOR_VIDEO]
        )
        digest = store.store_blob(data)
        store.add_media(case.case_id, digest, "video", len(data))
        store.add_prediction(case.case_id, prediction)
        return _predict_response(case, prediction)

    @app.post("/api/v1/predict/{slug}")
    async def predict_image_endpoint(slug: str, request: Request, file: UploadFile = File(...)):
        task_id = PREDICT_SLUGS.get(slug)
        if task_id is None:
            raise _http_error(404, f"unknown prediction endpoint {slug!r}", "not_found")
        loaded = registry.get(task_id)
        if loaded is None:
            raise _http_error(503, f"no model loaded for task {task_id.value}", "no_model")
        data = await _read_limited(file, IMAGE_UPLOAD_LIMIT)
        case = _open_case(request)
        prediction = imageclf.predict_image(
            loaded.model, loaded.backbone, data, task_thresholds[task_id]
        )
        digest = store.store_blob(data)
        store.add_media(case.case_id, digest, "image", len(data))
        store.add_prediction(case.case_id, prediction)
        return _predict_response(case, prediction)

    @app.post("/api/v1/dosage")
    async def dosage_endpoint(body: DosageRequest):
        try:
            band = dosage.AgeBand(body.age_band)
        except ValueError:
            raise ValidationError(f"unknown age band {body.age_band!r}")
        group = dosage.weight_group_for_label(body.weight_group)
        plan = dosage.recommend_dose(body.disease, band, group, drug_rules)
        response = plan.to_json_obj()
        if body.case_id is not None:
            if store.get(body.case_id) is None:
                raise _http_error(404, f"unknown case id {body.case_id!r}", "not_found")
            store.attach_dose_plan(body.case_id, plan)
            response["case_id"] = body.case_id
        return response

    @app.get("/api/v1/cases/{case_id}")
    async def get_case(case_id: str):
        record = store.get(case_id)
        if record is None:
            raise _http_error(404, f"unknown case id {case_id!r}", "not_found")
        return record.to_json_obj()

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _decode_video_upload(data: bytes, backbone: BackboneSpec) -> videoclf.FrameSequence:
    """A zip of frame images is the codec-free path; anything else needs
    the pluggable container decoder."""
    buffer = io.BytesIO(data)
    if zipfile.is_zipfile(buffer):
        with tempfile.TemporaryDirectory(prefix="taurus-frames-") as tmp:
            tmp_path = Path(tmp)
            with zipfile.ZipFile(io.BytesIO(data)) as archive:
                for info in archive.infolist():
                    if info.is_dir():
                        continue
                    name = Path(info.filename).name
                    if not name or name.startswith("."):
                        continue
                    (tmp_path / name).write_bytes(archive.read(info))
            return videoclf.load_frameset_dir(tmp_path, backbone)
    with tempfile.NamedTemporaryFile(prefix="taurus-clip-", delete=False) as fh:
        fh.write(data)
        clip_path = Path(fh.name)
    try:
        return videoclf.decode_video_file(clip_path, backbone)
    finally:
        clip_path.unlink(missing_ok=True)
