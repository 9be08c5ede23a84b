"""HTTP surface over the run engine.

Thin by contract: every handler routes to an engine call and shapes the
response; no scoring, drafting, or scheduling logic lives here. Mutating
requests serialize through a per-run lock; reads return point-in-time
snapshots without locking.

Auth is a single static bearer token (DIKWFLOW_API_TOKEN). When the variable
is unset the API is open, which suits local desk use and tests.
"""

from __future__ import annotations

import os
import threading
from pathlib import Path
from typing import Any, Mapping

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .artifacts import ReviewActionKind
from .orchestrator import (
    Engine,
    InvalidState,
    OrchestratorError,
    RunConfig,
    UnknownTopic,
)

OPEN_PATHS = {"/healthz", "/openapi.json", "/docs", "/redoc"}

_STATUS_FOR_CODE = {
    "NotFound": 404,
    "InvalidState": 409,
    "ValidationFailed": 400,
    "Internal": 500,
}


class ApiFailure(Exception):
    """Carries exactly one ApiError body."""

    def __init__(self, code: str, message: str, detail: Any = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.detail = detail

    @property
    def status(self) -> int:
        return _STATUS_FOR_CODE[self.code]

    def body(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "detail": self.detail}


class RunRegistry:
    """Engines by run id, loaded lazily from the runs directory."""

    def __init__(self, runs_root: Path, store_root: Path):
        self.runs_root = runs_root
        self.store_root = store_root
        self._engines: dict[str, Engine] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def lock_for(self, run_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(run_id, threading.Lock())

    def add(self, engine: Engine) -> None:
        with self._registry_lock:
            self._engines[engine.run_id] = engine

    def get(self, run_id: str) -> Engine:
        with self._registry_lock:
            engine = self._engines.get(run_id)
        if engine is not None:
            return engine
        try:
            engine = Engine.load(self.runs_root, self.store_root, run_id)
        except UnknownTopic:
            raise ApiFailure("NotFound", f"no run named {run_id!r}")
        self.add(engine)
        return engine

    def run_ids(self) -> list[str]:
        on_disk = set()
        if self.runs_root.exists():
            on_disk = {p.name for p in self.runs_root.iterdir() if (p / "state.json").exists()}
        with self._registry_lock:
            return sorted(on_disk | set(self._engines))

    def engines(self) -> list[Engine]:
        return [self.get(run_id) for run_id in self.run_ids()]


def _normalize_status(raw: str) -> str:
    # accept AwaitingApproval, awaiting_approval, awaiting-approval
    out = []
    for i, ch in enumerate(raw):
        if ch.isupper() and i > 0:
            out.append("_")
        out.append(ch.lower())
    return "".join(out).replace("-", "_")


def _parse_run_config(body: Mapping[str, Any]) -> RunConfig:
    if not isinstance(body, Mapping):
        raise ApiFailure("ValidationFailed", "run config must be a JSON object")
    missing = [k for k in ("dataset_path", "catalog_ref", "seeds") if k not in body]
    if missing:
        raise ApiFailure("ValidationFailed", f"missing fields: {', '.join(missing)}")
    if not Path(str(body["dataset_path"])).exists():
        raise ApiFailure(
            "ValidationFailed", f"dataset path not found: {body['dataset_path']}"
        )
    try:
        config = RunConfig.from_dict(dict(body))
        config.validate()
    except ApiFailure:
        raise
    except Exception as exc:
        raise ApiFailure("ValidationFailed", str(exc))
    return config


def create_app(
    runs_root: str | Path,
    store_root: str | Path,
    token: str | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    registry = RunRegistry(Path(runs_root), Path(store_root))
    expected_token = token if token is not None else os.environ.get("DIKWFLOW_API_TOKEN")
    app = FastAPI(title="dikwflow", version="0.1.0")
    app.state.registry = registry

    @app.exception_handler(ApiFailure)
    async def _api_failure(_request: Request, exc: ApiFailure) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content=exc.body())

    @app.exception_handler(RequestValidationError)
    async def _bad_request(_request: Request, exc: RequestValidationError) -> JSONResponse:
        failure = ApiFailure("ValidationFailed", "invalid request body", detail=exc.errors())
        return JSONResponse(status_code=failure.status, content=failure.body())

    @app.exception_handler(Exception)
    async def _internal(_request: Request, exc: Exception) -> JSONResponse:
        failure = ApiFailure("Internal", f"{type(exc).__name__}: {exc}")
        return JSONResponse(status_code=failure.status, content=failure.body())

    @app.middleware("http")
    async def _auth(request: Request, call_next):
        path = request.url.path
        # the console shell must load before the user can enter a token
        open_static = static_dir is not None and (path == "/" or path.startswith("/ui"))
        if expected_token and path not in OPEN_PATHS and not open_static:
            header = request.headers.get("authorization", "")
            if header != f"Bearer {expected_token}":
                failure = ApiFailure("ValidationFailed", "missing or invalid bearer token")
                return JSONResponse(status_code=401, content=failure.body())
        return await call_next(request)

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/runs", status_code=201)
    def create_run(body: dict = Body(...)) -> dict[str, Any]:
        config = _parse_run_config(body)
        run_id = body.get("run_id")
        try:
            engine = Engine(registry.runs_root, registry.store_root, config, run_id=run_id)
        except OrchestratorError as exc:
            raise ApiFailure("ValidationFailed", str(exc))
        registry.add(engine)
        with registry.lock_for(engine.run_id):
            snapshot = engine.run()  # advance to the first human gate
        return {"run_id": engine.run_id, "snapshot": snapshot}

    @app.get("/runs")
    def list_runs() -> dict[str, Any]:
        return {"runs": registry.run_ids()}

    @app.get("/runs/{run_id}")
    def run_snapshot(run_id: str) -> dict[str, Any]:
        return registry.get(run_id).snapshot()

    @app.get("/runs/{run_id}/topics")
    def run_topics(run_id: str, status: str | None = None) -> dict[str, Any]:
        engine = registry.get(run_id)
        wanted = _normalize_status(status) if status else None
        topics = []
        for key in sorted(engine.records):
            record = engine.records[key]
            if wanted and record.status.value != wanted:
                continue
            topics.append(engine.topic_detail(record))
        return {"run_id": run_id, "topics": topics}

    @app.get("/runs/{run_id}/portfolio")
    def run_portfolio(run_id: str) -> dict[str, Any]:
        engine = registry.get(run_id)
        portfolios = engine.portfolios()
        if not portfolios:
            raise ApiFailure("NotFound", f"run {run_id!r} has no resolved portfolio")
        return {"run_id": run_id, "portfolios": portfolios}

    @app.post("/topics/{topic_hash}/review")
    def review_topic(topic_hash: str, body: dict = Body(...)) -> dict[str, Any]:
        action_raw = str(body.get("action", "")).lower()
        try:
            action = ReviewActionKind(action_raw)
        except ValueError:
            raise ApiFailure(
                "ValidationFailed", f"action must be approve, reject, or edit; got {action_raw!r}"
            )
        actor = body.get("actor")
        if not actor:
            raise ApiFailure("ValidationFailed", "actor is required")
        engine, record = _locate_topic(registry, topic_hash, body.get("run_id"))
        with registry.lock_for(engine.run_id):
            try:
                engine.review_action(
                    record.topic_id,
                    action,
                    actor=str(actor),
                    comment=str(body.get("comment", "")),
                    new_body=body.get("new_body"),
                    candidate=body.get("candidate"),
                )
            except InvalidState as exc:
                raise ApiFailure("InvalidState", str(exc))
            except UnknownTopic as exc:
                raise ApiFailure("NotFound", str(exc))
            except ValueError as exc:
                # malformed replacement body on an edit
                raise ApiFailure("ValidationFailed", str(exc))
            # report the state the action itself produced, then let the
            # schedule pick the topic up
            detail = engine.topic_detail(engine.records[record.topic_id.key])
            engine.run()
        return {"run_id": engine.run_id, "topic": detail}

    @app.get("/artifacts/{topic_hash}")
    def artifact(topic_hash: str) -> dict[str, Any]:
        for engine in registry.engines():
            found = engine.find_artifact(topic_hash)
            if found is not None:
                return found.to_json_dict()
        raise ApiFailure("NotFound", f"no artifact with topic hash {topic_hash!r}")

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        from starlette.responses import RedirectResponse

        @app.get("/", include_in_schema=False)
        def _index() -> RedirectResponse:
            return RedirectResponse("/ui/")

        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def _locate_topic(registry: RunRegistry, topic_hash: str, run_id: str | None):
    if run_id:
        engine = registry.get(run_id)
        record = engine.find_record_by_hash(topic_hash)
        if record is None:
            raise ApiFailure("NotFound", f"run {run_id!r} has no topic {topic_hash!r}")
        return engine, record
    for engine in registry.engines():
        record = engine.find_record_by_hash(topic_hash)
        if record is not None:
            return engine, record
    raise ApiFailure("NotFound", f"no run contains topic {topic_hash!r}")
