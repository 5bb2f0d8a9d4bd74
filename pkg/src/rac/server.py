"""HTTP API for the annotation workflow plus static hosting for the web UI.

The API never exposes reference codes or model predictions to annotation
endpoints; they are only aggregated into the agreement report.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .annotation import (
    AnnotationError,
    AnnotationRecord,
    AnnotationService,
    agreement_report,
    search_codes,
)
from .corpus import CodeTitleTable, Document


class AnnotationIn(BaseModel):
    annotator_id: str
    note_id: str
    codes: list[str]
    started_at: float
    submitted_at: float


def create_app(
    documents: list[Document],
    code_table: CodeTitleTable,
    service: AnnotationService,
    model_scores: dict[str, np.ndarray] | None = None,
    threshold: float = 0.5,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="code annotation server")
    notes = {d.id: d.text for d in documents}
    references = {d.id: set(d.codes) for d in documents}

    @app.exception_handler(AnnotationError)
    async def annotation_error(_, exc: AnnotationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/api/session")
    def get_session(annotator: str = Query(..., min_length=1)):
        return service.get_or_create_session(annotator).state()

    @app.get("/api/notes/{note_id}")
    def get_note(note_id: str):
        if note_id not in notes:
            raise HTTPException(status_code=404, detail=f"unknown note {note_id!r}")
        return {"id": note_id, "text": notes[note_id]}

    @app.get("/api/codes")
    def get_codes(query: str = "", limit: int = Query(20, ge=0, le=500)):
        results = search_codes(code_table, query, limit)
        return {"results": [{"code": c, "title": t} for c, t in results]}

    @app.post("/api/annotations")
    def post_annotation(body: AnnotationIn):
        record = AnnotationRecord(
            annotator_id=body.annotator_id,
            note_id=body.note_id,
            codes=frozenset(body.codes),
            started_at=body.started_at,
            submitted_at=body.submitted_at,
        )
        state = service.submit(record)
        return {"status": "ok", "session": state}

    @app.get("/api/report")
    def get_report():
        annotations = {
            annotator: {note: set(rec.codes) for note, rec in service.store.by_annotator(annotator).items()}
            for annotator in service.store.annotators()
        }
        report = agreement_report(
            annotations, references, code_table,
            model_scores=model_scores, threshold=threshold,
        )
        return report.to_dict()

    if frontend_dir is not None:
        frontend_dir = Path(frontend_dir)
        index = frontend_dir / "index.html"

        @app.get("/")
        def root():
            if index.exists():
                return FileResponse(index)
            raise HTTPException(status_code=404, detail="frontend not built")

        if frontend_dir.exists():
            app.mount("/static", StaticFiles(directory=frontend_dir), name="static")

    return app
