"""Review API: ranked sequence listings, heat maps, band images, dispositions.

The model, manifest, and score rows are loaded once at startup and shared
immutably across requests.  Dispositions are the only write path: each
update is appended to the score database and mirrored in memory under a
single writer lock.  Heat maps render on demand into a small LRU cache
keyed by (sequence, normalization, model fingerprint).

List responses are bare JSON arrays; object responses carry a schema
version in a top-level "v" field.  Error bodies never include filesystem
paths.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .ingest import ArchiveManifest, load_cube, load_manifest
from .render import NormalizationMode, render_heatmap
from .spectral import BackgroundModel, load_model, score_cube
from .triage import (
    DISPOSITION_STATES,
    NOTE_LIMIT,
    RANK_KEYS,
    RANK_ORDERS,
    Disposition,
    load_database,
    rank,
    upsert_disposition,
)

__all__ = ["ServiceConfig", "create_app", "run_service"]

SCHEMA_V = 1


@dataclass(frozen=True)
class ServiceConfig:
    port: int
    model_path: Path
    manifest_path: Path
    score_db_path: Path
    static_dir: Path | None = None
    cache_capacity: int = 256

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port must be in [1, 65535], got {self.port}")
        if self.cache_capacity < 0:
            raise ValueError("cache_capacity must be non-negative")
        for name, path in (
            ("model", self.model_path),
            ("manifest", self.manifest_path),
            ("score database", self.score_db_path),
        ):
            if not Path(path).is_file():
                raise ValueError(f"{name} path does not exist")
        if self.static_dir is not None and not Path(self.static_dir).is_dir():
            raise ValueError("static_dir does not exist")


class _LruCache:
    """Tiny thread-safe byte cache; capacity 0 disables caching."""

    def __init__(self, capacity: int):
        self._capacity = capacity
        self._items: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            if key not in self._items:
                return None
            self._items.move_to_end(key)
            return self._items[key]

    def put(self, key, value) -> None:
        if self._capacity == 0:
            return
        with self._lock:
            self._items[key] = value
            self._items.move_to_end(key)
            while len(self._items) > self._capacity:
                self._items.popitem(last=False)


class _State:
    """Shared request state: immutable inputs plus the disposition ledger."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.model: BackgroundModel = load_model(config.model_path)
        self.manifest: ArchiveManifest = load_manifest(config.manifest_path)
        db = load_database(config.score_db_path)
        self.scores = db.scores
        self.dispositions = dict(db.dispositions)
        self.records = {rec.sequence_id: rec for rec in self.manifest.entries}
        self.heatmaps = _LruCache(config.cache_capacity)
        self.write_lock = threading.Lock()

    def record_disposition(self, disposition: Disposition) -> None:
        with self.write_lock:
            upsert_disposition(self.config.score_db_path, disposition)
            self.dispositions[disposition.sequence_id] = disposition


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"v": SCHEMA_V, "error": message})


def _disposition_state(state: _State, sequence_id: str) -> str:
    held = state.dispositions.get(sequence_id)
    return held.state if held is not None else "unreviewed"


def _sequence_row(state: _State, score) -> dict:
    rec = state.records.get(score.sequence_id)
    return {
        "sequence_id": score.sequence_id,
        "sol": rec.sol if rec is not None else None,
        "eye": rec.eye if rec is not None else None,
        "scores": {
            "max": score.max,
            "mean": score.mean,
            "variance": score.variance,
            "p99": score.p99,
        },
        "disposition": _disposition_state(state, score.sequence_id),
    }


def _png_response(body: bytes) -> Response:
    return Response(content=body, media_type="image/png")


def create_app(config: ServiceConfig) -> FastAPI:
    state = _State(config)
    app = FastAPI(title="rxtriage", docs_url=None, redoc_url=None, openapi_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(Exception)
    async def _internal_error(request: Request, exc: Exception):
        # never echo exception text: it can carry filesystem paths
        return _error(500, "internal error")

    @app.get("/api/sequences")
    def list_sequences(
        sort: str = "max",
        order: str = "desc",
        limit: str | None = None,
        offset: str = "0",
    ):
        # paging params stay strings so a bad value yields our own 400,
        # not the framework's 422
        if sort not in RANK_KEYS:
            return _error(400, f"unknown sort key {sort!r}; expected one of {list(RANK_KEYS)}")
        if order not in RANK_ORDERS:
            return _error(400, f"unknown order {order!r}; expected one of {list(RANK_ORDERS)}")
        try:
            limit_n = None if limit is None else int(limit)
            offset_n = int(offset)
        except ValueError:
            return _error(400, "limit and offset must be integers")
        if limit_n is not None and limit_n < 0:
            return _error(400, "limit must be non-negative")
        if offset_n < 0:
            return _error(400, "offset must be non-negative")
        ordered = rank(state.scores, key=sort, order=order)
        window = (
            ordered[offset_n:] if limit_n is None else ordered[offset_n : offset_n + limit_n]
        )
        return [_sequence_row(state, s) for s in window]

    @app.get("/api/sequences/{sequence_id}/heatmap.png")
    def heatmap(sequence_id: str, norm: str = "local"):
        try:
            mode = NormalizationMode(norm)
        except ValueError:
            return _error(400, f"unknown norm {norm!r}; expected 'local' or 'global'")
        rec = state.records.get(sequence_id)
        if rec is None:
            return _error(404, f"unknown sequence {sequence_id!r}")
        key = (sequence_id, mode.value, state.model.fingerprint)
        body = state.heatmaps.get(key)
        if body is None:
            cube = load_cube(rec, state.model.brightness_corrected)
            novelty = score_cube(cube, state.model, sequence_id)
            body = render_heatmap(novelty, mode, state.model)
            state.heatmaps.put(key, body)
        return _png_response(body)

    @app.get("/api/sequences/{sequence_id}/band/{k}.png")
    def band_image(sequence_id: str, k: int):
        rec = state.records.get(sequence_id)
        if rec is None:
            return _error(404, f"unknown sequence {sequence_id!r}")
        if not 1 <= k <= len(rec.bands):
            return _error(400, f"band index must be in 1..{len(rec.bands)}, got {k}")
        return _png_response(rec.bands[k - 1].path.read_bytes())

    @app.get("/api/sequences/{sequence_id}/rgb.png")
    def rgb_image(sequence_id: str):
        rec = state.records.get(sequence_id)
        if rec is None:
            return _error(404, f"unknown sequence {sequence_id!r}")
        return _png_response(rec.rgb_path.read_bytes())

    @app.post("/api/sequences/{sequence_id}/disposition")
    async def set_disposition(sequence_id: str, request: Request):
        rec = state.records.get(sequence_id)
        if rec is None:
            return _error(404, f"unknown sequence {sequence_id!r}")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body must be a JSON object")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")
        db_state = body.get("state")
        if db_state not in DISPOSITION_STATES:
            return _error(
                400, f"state must be one of {list(DISPOSITION_STATES)}, got {db_state!r}"
            )
        note = body.get("note")
        if note is not None and not isinstance(note, str):
            return _error(400, "note must be a string")
        if note is not None and len(note) > NOTE_LIMIT:
            return _error(413, f"note exceeds {NOTE_LIMIT} characters")
        disposition = Disposition(
            sequence_id=sequence_id,
            state=db_state,
            note=note,
            updated_at=datetime.now(timezone.utc),
        )
        state.record_disposition(disposition)
        return {
            "v": SCHEMA_V,
            "sequence_id": disposition.sequence_id,
            "state": disposition.state,
            "note": disposition.note,
            "updated_at": disposition.updated_at.isoformat().replace("+00:00", "Z"),
        }

    @app.get("/api/model")
    def model_info():
        model = state.model
        pct = model.score_percentiles
        return {
            "v": SCHEMA_V,
            "n_bands": model.n_bands,
            "band_wavelengths": list(model.band_wavelengths),
            "brightness_corrected": model.brightness_corrected,
            "ridge_lambda": model.ridge_lambda,
            "training_pixel_count": model.training_pixel_count,
            "fingerprint": model.fingerprint,
            "score_percentiles": pct.as_dict() if pct is not None else None,
        }

    if config.static_dir is not None:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="static")

    return app


def run_service(config: ServiceConfig, host: str = "127.0.0.1") -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=config.port, log_level="info")
