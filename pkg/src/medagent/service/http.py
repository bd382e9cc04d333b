"""FastAPI wiring: routes, error mapping, and app assembly.

Every error response is JSON with a machine-readable `code` and a
human-readable `message` (plus a `detail` object when the error carries
structured context).  Upload size is enforced from Content-Length before
the body is read, so an oversize payload is never parsed.
"""

from __future__ import annotations

import json
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..errors import AgentError
from ..network import HYPERPARAMETER_FIELDS
from ..vault import ModelRegistry
from .config import ServiceConfig
from .jobs import JobManager
from .sessions import SessionStore


class TransportError(AgentError):
    code = "transport_error"


class PayloadTooLarge(TransportError):
    code = "payload_too_large"

    def __init__(self, size: int, limit: int):
        self.size = size
        self.limit = limit
        super().__init__(f"upload of {size} bytes exceeds the {limit}-byte limit")


class LengthRequired(TransportError):
    code = "length_required"

    def __init__(self):
        super().__init__("Content-Length header is required for dataset uploads")


class BadRequestBody(TransportError):
    code = "bad_request_body"


_STATUS_FOR_CODE = {
    "wrong_state": 409,
    "job_not_finished": 409,
    "payload_too_large": 413,
    "length_required": 411,
    "unknown_session": 404,
    "unknown_job": 404,
    "horizon_unavailable": 404,
}


def _error_response(e: AgentError) -> JSONResponse:
    payload = e.payload()
    detail = {}
    for key, value in vars(e).items():
        if key.startswith("_"):
            continue
        if isinstance(value, (str, int, float, bool)) or value is None:
            detail[key] = value
        elif isinstance(value, (list, tuple)) and all(
                isinstance(item, (str, int, float)) for item in value):
            detail[key] = list(value)
    if detail:
        payload["detail"] = detail
    return JSONResponse(status_code=_STATUS_FOR_CODE.get(e.code, 422),
                        content=payload)


async def _json_body(request: Request, required: bool = True) -> dict:
    raw = await request.body()
    if not raw:
        if required:
            raise BadRequestBody("request body must be a JSON object")
        return {}
    try:
        body = json.loads(raw)
    except json.JSONDecodeError as e:
        raise BadRequestBody(f"request body is not valid JSON: {e}") from e
    if not isinstance(body, dict):
        raise BadRequestBody("request body must be a JSON object")
    return body


def create_app(config: ServiceConfig | None = None,
               registry: ModelRegistry | None = None) -> FastAPI:
    config = config or ServiceConfig()
    registry = registry or ModelRegistry(config.model_dir)
    jobs = JobManager(slots=config.job_slots, grid_workers=config.workers,
                      grid_cap=config.grid_cap)
    store = SessionStore(registry, jobs, config.survey_log,
                         ttl_seconds=config.session_ttl_seconds,
                         grid_cap=config.grid_cap,
                         training_seed=config.training_seed,
                         upload_limit=config.upload_limit)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        jobs.shutdown()

    app = FastAPI(title="medagent", lifespan=lifespan)
    app.state.config = config
    app.state.registry = registry
    app.state.jobs = jobs
    app.state.store = store

    @app.exception_handler(AgentError)
    async def agent_error_handler(_: Request, e: AgentError):
        return _error_response(e)

    @app.post("/api/sessions")
    async def create_session(request: Request):
        body = await _json_body(request)
        session = store.create(body.get("flow"))
        return {"session_id": session.session_id, "flow": session.flow,
                "state": session.state, "prompt": store.prompt_for(session)}

    @app.get("/api/sessions/{session_id}")
    async def session_state(session_id: str):
        session = store.get(session_id)
        return {"session_id": session.session_id, "flow": session.flow,
                "state": session.state, "prompt": store.prompt_for(session)}

    @app.post("/api/sessions/{session_id}/answer")
    async def answer(session_id: str, request: Request):
        body = await _json_body(request)
        if "value" not in body:
            raise BadRequestBody('request body needs a "value" field')
        return store.answer(store.get(session_id), body["value"])

    @app.post("/api/sessions/{session_id}/dataset")
    async def upload_dataset(session_id: str, request: Request,
                             label: str | None = None):
        header = request.headers.get("content-length")
        if header is None:
            raise LengthRequired()
        try:
            announced = int(header)
        except ValueError:
            raise LengthRequired() from None
        if announced > config.upload_limit:
            raise PayloadTooLarge(announced, config.upload_limit)
        session = store.get(session_id)
        data = await request.body()
        if len(data) > config.upload_limit:
            raise PayloadTooLarge(len(data), config.upload_limit)
        return store.upload_dataset(session, data, label)

    @app.post("/api/sessions/{session_id}/confirm")
    async def confirm(session_id: str):
        return store.confirm_dataset(store.get(session_id))

    @app.post("/api/sessions/{session_id}/train")
    async def start_training(session_id: str, request: Request):
        body = await _json_body(request, required=False)
        if "grid" in body:
            grid_doc = body["grid"]
        elif any(k in HYPERPARAMETER_FIELDS for k in body):
            grid_doc = {k: v for k, v in body.items() if k != "seed"}
        else:
            grid_doc = "defaults"
        seed = body.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
            raise BadRequestBody("seed must be an integer")
        return store.configure_and_start(store.get(session_id), grid_doc, seed)

    @app.post("/api/sessions/{session_id}/survey")
    async def survey(session_id: str, request: Request):
        body = await _json_body(request)
        return store.submit_survey(store.get(session_id),
                                   body.get("rating"), body.get("comment"))

    @app.get("/api/jobs/{job_id}")
    async def job_status(job_id: str):
        return jobs.get(job_id).snapshot()

    @app.get("/api/jobs/{job_id}/model")
    async def job_model(job_id: str):
        data = jobs.model_bytes(job_id)
        return Response(content=data, media_type="application/octet-stream",
                        headers={"Content-Disposition":
                                 f'attachment; filename="{job_id}.imbm"'})

    @app.get("/api/jobs/{job_id}/roc.svg")
    async def job_roc(job_id: str):
        return Response(content=jobs.roc_svg(job_id), media_type="image/svg+xml")

    @app.get("/api/models")
    async def model_listing():
        return {"models": registry.listing()}

    static_dir = config.static_dir
    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def run_service(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port,
                log_level="info")
