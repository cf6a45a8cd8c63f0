"""HTTP facade over the annotation store for expert reviewers.

Reads go straight to the in-memory store; every mutation passes through
one process-wide lock, so task transitions are serialized and two
annotators racing for the same task resolve to one success and one
conflict. Error bodies are always ``{"code", "message"}``.
"""

from __future__ import annotations

import threading
from collections.abc import Mapping

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response

from .annotations import (
    KIND_VERIFY,
    AnnotationError,
    AnnotationFeedback,
    AnnotationStore,
    rate_task_id,
    submit_feedback,
    task_to_dict,
)
from .linking import ContextualizedArtifact, context_to_dict
from .records import TransactionRecord, to_artifact
from .risk import RiskVerdict, verdict_to_dict

_STATUS_BY_CODE = {
    "not_found": 404,
    "conflict": 409,
    "invalid_answer": 400,
    "invalid_request": 400,
}


def transaction_view(
    record: TransactionRecord,
    verdict: RiskVerdict,
    ctx: ContextualizedArtifact | None = None,
) -> dict:
    """JSON view served for one artifact: record, verdict, and links."""
    artifact = to_artifact(record)
    view = {
        "artifact_id": artifact.item_id,
        "record": artifact.item_schema,
        "verdict": verdict_to_dict(verdict),
        "links": [],
    }
    if ctx is not None:
        view["links"] = context_to_dict(ctx)["links"]
    return view


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"code": code, "message": message}, status_code=status)


class _BadRequest(AnnotationError):
    code = "invalid_request"


def create_app(
    store: AnnotationStore,
    transactions: Mapping[str, dict] | None = None,
) -> FastAPI:
    """Wire the review API around one store and its transaction views."""
    app = FastAPI(title="transaction review", docs_url=None, redoc_url=None)
    views = dict(transactions or {})
    write_lock = threading.Lock()

    @app.exception_handler(AnnotationError)
    async def _store_error(request: Request, exc: AnnotationError):
        return _error(_STATUS_BY_CODE.get(exc.code, 500), exc.code, str(exc))

    @app.exception_handler(RequestValidationError)
    async def _body_error(request: Request, exc: RequestValidationError):
        return _error(400, "invalid_request", "request body must be JSON")

    @app.get("/api/tasks/next")
    def next_task(kind: str | None = None, annotator: str | None = None):
        open_tasks = store.open_tasks(kind or None)
        if not open_tasks:
            return Response(status_code=204)
        return task_to_dict(open_tasks[0])

    @app.get("/api/tasks/{task_id}")
    def task_detail(task_id: str):
        task = store.tasks.get(task_id)
        if task is None:
            return _error(404, "not_found", f"no such task {task_id!r}")
        return task_to_dict(task)

    @app.post("/api/tasks/{task_id}/response")
    def respond(task_id: str, payload: dict):
        if "answer" not in payload:
            raise _BadRequest("missing field 'answer'")
        annotator_id = payload.get("annotator_id")
        if not isinstance(annotator_id, str) or not annotator_id:
            raise _BadRequest("missing field 'annotator_id'")
        feedback = AnnotationFeedback(
            task_id=task_id,
            answer=payload["answer"],
            annotator_id=annotator_id,
            answered_at=store.clock(),
        )
        with write_lock:
            task = submit_feedback(task_id, feedback, store)
            body = {"task": task_to_dict(task)}
            if task.kind == KIND_VERIFY and feedback.answer:
                follow = store.tasks.get(rate_task_id(task.artifact_id))
                if follow is not None:
                    body["follow_up"] = task_to_dict(follow)
        return body

    @app.get("/api/stats")
    def stats():
        return store.counts()

    @app.get("/api/transactions/{artifact_id}")
    def transaction_detail(artifact_id: str):
        view = views.get(artifact_id)
        if view is None:
            return _error(404, "not_found", f"no artifact {artifact_id!r}")
        return view

    return app
