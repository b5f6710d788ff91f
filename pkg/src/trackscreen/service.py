"""HTTP/JSON API over the store and detectors.

Endpoints are documented in docs/api.md. Detection runs execute on worker
threads; identical payloads coalesce onto one run id, and per-method
results are materialized in the store so screening, consensus, case review
and evaluation are pure reads afterwards. Every error is a structured
{"error": {code, message, hint}} body, never a stack trace.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import evaluation
from .detectors import DetectorConfig, UnknownMethod, list_methods, method_ids, run_detector
from .evaluation import StaleCursor, build_case_review, build_screening_page, consensus, evaluate_methods
from .store import EventSlice, Store


@dataclass
class ServiceConfig:
    port: int = 8000
    db_path: str = "trackscreen.db"
    cache_size: int = 128
    seed: int = 42
    frontend_dir: str = ""

    @classmethod
    def load(cls, path: str | Path | None = None) -> "ServiceConfig":
        """Key=value config file, then TRACKSCREEN_PORT / TRACKSCREEN_DB env overrides."""
        cfg = cls()
        if path:
            for line in Path(path).read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if not line or line.startswith("#") or "=" not in line:
                    continue
                key, _, value = line.partition("=")
                key, value = key.strip(), value.strip()
                if key == "port":
                    cfg.port = int(value)
                elif key == "db_path":
                    cfg.db_path = value
                elif key == "cache_size":
                    cfg.cache_size = int(value)
                elif key == "seed":
                    cfg.seed = int(value)
                elif key == "frontend_dir":
                    cfg.frontend_dir = value
        if "TRACKSCREEN_PORT" in os.environ:
            cfg.port = int(os.environ["TRACKSCREEN_PORT"])
        if "TRACKSCREEN_DB" in os.environ:
            cfg.db_path = os.environ["TRACKSCREEN_DB"]
        return cfg


class SliceParams(BaseModel):
    event_code: str
    gender: str = "men"
    date_from: date = date(1990, 1, 1)
    date_to: date = date(2100, 1, 1)
    wind_legal_only: bool = True

    def to_slice(self) -> EventSlice:
        return EventSlice(
            event_code=self.event_code,
            gender=self.gender,
            date_from=self.date_from,
            date_to=self.date_to,
            wind_legal_only=self.wind_legal_only,
        )


class DetectRequest(BaseModel):
    slice: SliceParams
    methods: list[str] = Field(default_factory=list)
    config: dict = Field(default_factory=dict)


@dataclass
class RunRecord:
    run_id: str
    slice_: EventSlice
    methods: list[str]
    config_hash: str
    status: str = "queued"  # queued | running | done | failed
    method_status: dict[str, dict] = field(default_factory=dict)
    error: str | None = None

    def to_payload(self) -> dict:
        return {
            "run_id": self.run_id,
            "slice": self.slice_.describe(),
            "methods": self.methods,
            "config_hash": self.config_hash,
            "status": self.status,
            "method_status": self.method_status,
            "error": self.error,
        }


class RunRegistry:
    def __init__(self) -> None:
        self._runs: dict[str, RunRecord] = {}
        self._by_key: dict[str, str] = {}
        self._lock = threading.Lock()

    def get(self, run_id: str) -> RunRecord | None:
        with self._lock:
            return self._runs.get(run_id)

    def find_or_create(self, key: str, factory) -> tuple[RunRecord, bool]:
        with self._lock:
            run_id = self._by_key.get(key)
            if run_id is not None:
                run = self._runs[run_id]
                if run.status != "failed":
                    return run, False
            run = factory()
            self._runs[run.run_id] = run
            self._by_key[key] = run.run_id
            return run, True


def _error(status_code: int, code: str, message: str, hint: str = "") -> JSONResponse:
    return JSONResponse(
        status_code=status_code,
        content={"error": {"code": code, "message": message, "hint": hint}},
    )


class ApiError(Exception):
    def __init__(self, status_code: int, code: str, message: str, hint: str = ""):
        self.status_code = status_code
        self.code = code
        self.message = message
        self.hint = hint
        super().__init__(message)


def create_app(store: Store, service_config: ServiceConfig | None = None) -> FastAPI:
    service_config = service_config or ServiceConfig()
    base_config = DetectorConfig(seed=service_config.seed)
    app = FastAPI(title="trackscreen", version="0.1.0")
    runs = RunRegistry()
    executor = ThreadPoolExecutor(max_workers=2, thread_name_prefix="detect")
    inflight: dict[tuple[str, str, str], threading.Event] = {}
    inflight_lock = threading.Lock()

    app.state.store = store
    app.state.runs = runs
    app.state.executor = executor

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return _error(exc.status_code, exc.code, exc.message, exc.hint)

    @app.exception_handler(Exception)
    async def handle_unexpected(request: Request, exc: Exception):
        return _error(500, "internal_error", "unexpected server error", type(exc).__name__)

    def known_slice(slice_: EventSlice) -> None:
        codes = {s["event_code"] for s in store.list_slices()}
        if slice_.event_code not in codes:
            raise ApiError(404, "unknown_slice", f"no performances for event {slice_.event_code!r}",
                           "GET /api/slices lists available event codes")

    def slice_from_query(
        event_code: str,
        gender: str,
        date_from: str | None,
        date_to: str | None,
        wind_legal_only: bool,
    ) -> EventSlice:
        try:
            return EventSlice(
                event_code=event_code,
                gender=gender,
                date_from=date.fromisoformat(date_from) if date_from else date(1990, 1, 1),
                date_to=date.fromisoformat(date_to) if date_to else date(2100, 1, 1),
                wind_legal_only=wind_legal_only,
            )
        except ValueError as exc:
            raise ApiError(422, "bad_slice", str(exc))

    def run_one_method(slice_: EventSlice, method_id: str, config: DetectorConfig) -> None:
        # at most one computation per (slice, method, config); duplicates wait
        key = (slice_.key(), method_id, config.config_hash())
        while True:
            if store.get_result(slice_, method_id, config.config_hash()) is not None:
                return
            with inflight_lock:
                event = inflight.get(key)
                if event is None:
                    inflight[key] = threading.Event()
                    break
            event.wait()
        try:
            histories = store.query_slice(slice_)
            result = run_detector(method_id, histories, config)
            store.put_result(slice_, config.config_hash(), result)
        finally:
            with inflight_lock:
                inflight.pop(key).set()

    def execute_run(run: RunRecord, config: DetectorConfig) -> None:
        run.status = "running"
        try:
            for method_id in run.methods:
                run.method_status[method_id]["status"] = "running"
                run_one_method(run.slice_, method_id, config)
                result = store.get_result(run.slice_, method_id, config.config_hash())
                run.method_status[method_id] = {
                    "status": "done",
                    "wall_time_ms": result.wall_time_ms if result else None,
                    "athletes_flagged": len(result.athletes_flagged) if result else None,
                }
            run.status = "done"
        except Exception as exc:  # surfaces through GET /api/runs/{id}
            run.status = "failed"
            run.error = f"{type(exc).__name__}: {exc}"

    @app.get("/api/methods")
    def get_methods() -> list[dict]:
        return list_methods()

    @app.get("/api/slices")
    def get_slices() -> list[dict]:
        return store.list_slices()

    @app.post("/api/detect", status_code=202)
    def post_detect(body: DetectRequest) -> dict:
        slice_ = body.slice.to_slice()
        known_slice(slice_)
        methods = body.methods or method_ids()
        unknown = [m for m in methods if m not in method_ids()]
        if unknown:
            raise ApiError(422, "unknown_method", f"unknown methods: {', '.join(unknown)}",
                           "GET /api/methods lists valid ids")
        try:
            config = base_config.with_overrides(body.config)
        except ValueError as exc:
            raise ApiError(422, "bad_config", str(exc), "config keys must be detector settings")

        payload = json.dumps(
            {"slice": slice_.describe(), "methods": sorted(methods), "config": config.config_hash()},
            sort_keys=True,
        )
        key = hashlib.sha256(payload.encode()).hexdigest()

        def factory() -> RunRecord:
            run = RunRecord(
                run_id=uuid.uuid4().hex[:12],
                slice_=slice_,
                methods=list(methods),
                config_hash=config.config_hash(),
            )
            run.method_status = {m: {"status": "queued"} for m in methods}
            return run

        run, created = runs.find_or_create(key, factory)
        if created:
            executor.submit(execute_run, run, config)
        return {"run_id": run.run_id, "status": run.status, "config_hash": run.config_hash}

    @app.get("/api/runs/{run_id}")
    def get_run(run_id: str) -> dict:
        run = runs.get(run_id)
        if run is None:
            raise ApiError(404, "unknown_run", f"no run {run_id!r}")
        return run.to_payload()

    def materialized_results(slice_: EventSlice, config_hash: str | None) -> dict:
        results = store.results_for_slice(slice_, config_hash or base_config.config_hash())
        if not results:
            raise ApiError(409, "not_materialized",
                           "no detection results for this slice and config",
                           "POST /api/detect first, then retry")
        return results

    @app.get("/api/screen")
    def get_screen(
        event_code: str,
        method: str,
        gender: str = "men",
        date_from: str | None = None,
        date_to: str | None = None,
        wind_legal_only: bool = True,
        cursor: str | None = None,
        config_hash: str | None = None,
    ) -> Response:
        slice_ = slice_from_query(event_code, gender, date_from, date_to, wind_legal_only)
        cfg_hash = config_hash or base_config.config_hash()
        results = materialized_results(slice_, cfg_hash)
        if method not in results:
            raise ApiError(409, "not_materialized", f"method {method!r} not materialized for this slice",
                           "POST /api/detect with this method first")

        def build() -> bytes:
            try:
                page = build_screening_page(
                    results, method, slice_.describe(), cursor=cursor,
                    materialization_key=f"{slice_.key()}:{cfg_hash}",
                )
            except StaleCursor as exc:
                raise ApiError(410, "stale_cursor", str(exc), "restart pagination from the first page")
            return json.dumps(page.to_payload(), sort_keys=True).encode()

        payload = store.cached_screen(slice_, method, cfg_hash, build, cursor=cursor)
        return Response(content=payload, media_type="application/json")

    @app.get("/api/athletes/{athlete_id}")
    def get_athlete(
        athlete_id: str,
        event_code: str,
        gender: str = "men",
        date_from: str | None = None,
        date_to: str | None = None,
        wind_legal_only: bool = True,
        config_hash: str | None = None,
    ) -> dict:
        slice_ = slice_from_query(event_code, gender, date_from, date_to, wind_legal_only)
        histories = store.query_slice(slice_)
        history = next((h for h in histories if h.athlete_id == athlete_id), None)
        if history is None:
            raise ApiError(404, "unknown_athlete", f"athlete {athlete_id!r} has no rows in this slice")
        results = store.results_for_slice(slice_, config_hash or base_config.config_hash())
        view = build_case_review(history, results)
        view["athlete_name"] = store.athlete_name(athlete_id)
        view["is_sanctioned"] = athlete_id in store.sanctioned_athlete_ids()
        view["competitions"] = [
            {
                "competition_id": comp.competition_id,
                "name": comp.name,
                "date": comp.date.isoformat(),
                "country": comp.country,
                "venue": comp.venue,
                "event_codes": sorted(comp.event_codes),
            }
            for cid in view["competition_ids"]
            if (comp := store.competition(cid)) is not None
        ]
        return view

    @app.get("/api/consensus")
    def get_consensus(
        event_code: str,
        gender: str = "men",
        date_from: str | None = None,
        date_to: str | None = None,
        wind_legal_only: bool = True,
        min_methods: int = Query(default=2, ge=1),
        sanctioned_only: bool = False,
        methods: str | None = None,
        config_hash: str | None = None,
    ) -> dict:
        slice_ = slice_from_query(event_code, gender, date_from, date_to, wind_legal_only)
        results = materialized_results(slice_, config_hash)
        if methods:
            wanted = set(methods.split(","))
            results = {m: r for m, r in results.items() if m in wanted}
        if len(results) < 2:
            raise ApiError(409, "not_materialized", "consensus needs at least two materialized methods",
                           "POST /api/detect with more methods")
        entries = consensus(list(results.values()), store.sanctioned_athlete_ids(), min_methods=min_methods)
        if sanctioned_only:
            entries = [e for e in entries if e.is_sanctioned]
        return {
            "slice": slice_.describe(),
            "min_methods": min_methods,
            "methods_materialized": sorted(results),
            "entries": [e.to_payload() for e in entries],
        }

    @app.get("/api/evaluate")
    def get_evaluate(
        event_code: str,
        gender: str = "men",
        date_from: str | None = None,
        date_to: str | None = None,
        wind_legal_only: bool = True,
        config_hash: str | None = None,
    ) -> dict:
        slice_ = slice_from_query(event_code, gender, date_from, date_to, wind_legal_only)
        results = materialized_results(slice_, config_hash)
        report = evaluate_methods(
            list(results.values()), store.get_sanctions(), slice_.describe(),
        )
        return report.to_payload()

    frontend = Path(service_config.frontend_dir) if service_config.frontend_dir else None
    if frontend and frontend.is_dir():
        app.mount("/", StaticFiles(directory=str(frontend), html=True), name="frontend")

    return app


def serve(store: Store, config: ServiceConfig) -> None:
    import uvicorn

    app = create_app(store, config)
    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="warning")
