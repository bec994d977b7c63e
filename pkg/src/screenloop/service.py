"""HTTP annotation service: serves the uncertainty-ranked queue and
accepts label submissions from the companion UI.

The HTTP layer adds no semantics of its own; every response derives from
the pipeline state plus the annotation store.
"""
from __future__ import annotations

import threading
from datetime import datetime, timezone

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .corpus import AnnotationRecord, CorpusError
from .grammar import find_mentions
from .pipeline import Engine, PipelineError


def _now() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def _queue_item(engine: Engine, cand, round_no: int) -> dict:
    doc = engine.corpus[cand.doc_id]
    mentions = find_mentions(doc.title, engine.rules, doc_id=doc.id, field="title")
    if doc.abstract:
        mentions += find_mentions(doc.abstract, engine.rules, doc_id=doc.id, field="abstract")
    return {
        "doc_id": doc.id,
        "title": doc.title,
        "abstract": doc.abstract,
        "mentions": [
            {
                "field": m.field,
                "char_start": m.char_start,
                "char_end": m.char_end,
                "surface": m.surface,
                "normalized": m.normalized,
                "rule": m.rule,
            }
            for m in mentions
        ],
        "p": cand.p,
        "dist": cand.dist,
        "iqr": cand.iqr,
        "rank": cand.rank,
        "round": round_no,
    }


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="screenloop annotation service")
    store_lock = threading.Lock()

    @app.get("/api/queue")
    def queue(limit: int = 10):
        if limit < 1:
            return JSONResponse({"error": "limit must be >= 1"}, status_code=400)
        try:
            batch, round_no = engine.read_candidates(engine.batch_path)
        except PipelineError:
            return JSONResponse({"error": "no active batch"}, status_code=409)
        annotated = set(engine.store.current)
        pending = [c for c in batch if c.doc_id not in annotated]
        pending.sort(key=lambda c: c.rank)
        return [_queue_item(engine, c, round_no) for c in pending[:limit]]

    @app.get("/api/doc/{doc_id}")
    def doc(doc_id: str):
        if doc_id not in engine.corpus:
            return JSONResponse({"error": f"unknown doc_id: {doc_id}"}, status_code=404)
        try:
            batch, round_no = engine.read_candidates(engine.batch_path)
        except PipelineError:
            batch, round_no = [], engine.round_state()["round"]
        cand = next((c for c in batch if c.doc_id == doc_id), None)
        if cand is None:
            from .selection import SelectionCandidate

            cand = SelectionCandidate(doc_id=doc_id, p=0.5, x=0.0, dist=0.0, iqr=0.0, rank=0)
        return _queue_item(engine, cand, round_no)

    @app.post("/api/labels")
    async def labels(request: Request):
        if engine.advancing:
            return JSONResponse({"error": "round advancing"}, status_code=503)
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "malformed JSON body"}, status_code=400)
        if not isinstance(body, dict) or not isinstance(body.get("labels"), list):
            return JSONResponse({"error": "body must be {\"labels\": [...]}"}, status_code=400)
        round_no = engine.round_state()["round"]
        results = []
        with store_lock:
            for item in body["labels"]:
                doc_id = item.get("doc_id")
                label = item.get("label")
                annotator = item.get("annotator", "")
                timestamp = item.get("client_timestamp") or _now()
                if label == "skip":
                    engine.store.log_skip(doc_id, annotator, timestamp)
                    results.append({"doc_id": doc_id, "status": "ok", "skipped": True})
                    continue
                try:
                    engine.add_annotation(
                        AnnotationRecord(
                            doc_id=doc_id,
                            label=label,
                            annotator=annotator,
                            timestamp=timestamp,
                            round=round_no,
                        )
                    )
                    results.append({"doc_id": doc_id, "status": "ok"})
                except (CorpusError, TypeError) as exc:
                    results.append({"doc_id": doc_id, "status": "error", "reason": str(exc)})
        return {"results": results}

    @app.get("/api/status")
    def status():
        state = engine.round_state()
        round_no = state["round"]
        annotated = list(engine.store.current.values())
        try:
            batch, _ = engine.read_candidates(engine.batch_path)
            remaining = sum(1 for c in batch if c.doc_id not in engine.store.current)
        except PipelineError:
            remaining = 0
        return {
            "round": round_no,
            "annotated_total": len(annotated),
            "annotated_this_round": sum(1 for r in annotated if r.round == round_no),
            "batch_remaining": remaining,
            "positive_rate": state["prev_positive_rate"],
            "last_eval": state["last_eval"],
        }

    return app
