"""HTTP JSON API over the scene pipeline.

Sessions live in process. Stages run sequentially per session, model
inference is serialized behind one lock, and every error is reported
as {stage, code, message} JSON (plus span details when a compile
failure has them).
"""

from __future__ import annotations

import hashlib
import io
import threading

import numpy as np
from fastapi import FastAPI, Request, UploadFile
from fastapi.responses import JSONResponse, Response

from .captioner import caption_to_json, generate_caption
from .core import DEFAULT_CATEGORIES, SketchImage, instances_to_json
from .pipeline import (
    PipelineModels,
    SceneSession,
    StageError,
    colorize_scene,
    compile_session,
    overlay_png_bytes,
    result_png_bytes,
    segment,
)


def corpus_plugin(corpus_dir):
    """Exact-match segmenter: known corpus sketches get their ground truth.

    Uploads whose pixels match no corpus record raise, which the
    service reports as a segment-stage error.
    """
    from .synthdata import load_corpus

    table = {}
    for rec in load_corpus(corpus_dir):
        key = hashlib.sha256(rec.sketch.pixels.tobytes()).hexdigest()
        table[key] = rec.instances

    def plugin(sketch):
        key = hashlib.sha256(sketch.pixels.tobytes()).hexdigest()
        if key not in table:
            raise ValueError("sketch does not match any fixture scene")
        src = table[key]
        from .core import InstanceRecord

        return [InstanceRecord(id=i.id, label=i.label, score=i.score,
                               bbox=i.bbox, mask=i.mask.copy())
                for i in src], None
    return plugin


def _status_for(err: StageError) -> int:
    if err.code in ("not_found", "unknown_instance", "no_result"):
        return 404
    if err.stage == "compile":
        return 422
    return 400


def _session_json(session: SceneSession) -> dict:
    h, w = session.sketch.pixels.shape
    doc = {
        "session_id": session.session_id,
        "stage": session.stage,
        "image_size": [h, w],
        "instances": instances_to_json((h, w), session.instances)["instances"],
        "caption": caption_to_json(session.caption) if session.caption else None,
        "edited_text": session.edited_text,
        "instructions": session.compiled.to_json() if session.compiled else None,
        "has_result": session.final_image is not None,
        "skip_log": session.skip_log,
    }
    return doc


def create_app(models: PipelineModels = None, plugin=None,
               table=DEFAULT_CATEGORIES, refine: bool = True,
               combine: bool = False, seed: int = 0,
               frontend_dir=None) -> FastAPI:
    """Build the API; models/plugin may be injected by tests or the CLI."""
    app = FastAPI(title="sketchtint")
    sessions: dict = {}
    store_lock = threading.Lock()
    infer_lock = threading.Lock()

    def get_session(sid: str) -> SceneSession:
        with store_lock:
            session = sessions.get(sid)
        if session is None:
            raise StageError("session", "not_found", f"no session {sid}")
        return session

    @app.exception_handler(StageError)
    async def stage_error_handler(_request: Request, err: StageError):
        return JSONResponse(status_code=_status_for(err),
                            content=err.to_json())

    @app.post("/api/sessions")
    async def create_session(sketch: UploadFile):
        data = await sketch.read()
        if not data:
            raise StageError("segment", "empty_upload",
                             "uploaded sketch file is empty")
        try:
            from PIL import Image

            img = Image.open(io.BytesIO(data)).convert("L")
            pixels = (np.asarray(img) < 128).astype(np.uint8)
            sk = SketchImage(pixels)
        except StageError:
            raise
        except Exception as exc:
            raise StageError("segment", "bad_image",
                             f"could not decode sketch: {exc}") from exc
        if plugin is None:
            raise StageError("segment", "no_segmenter",
                             "service started without a segmenter plug-in")
        session = SceneSession(sketch=sk)
        session.instances = segment(sk, plugin, refine=refine,
                                    combine=combine,
                                    skip_log=session.skip_log)
        session.reach("segment")
        try:
            session.caption = generate_caption(session.instances, table,
                                               image_size=pixels.shape)
        except Exception as exc:
            raise StageError("caption", "caption_failure", str(exc)) from exc
        session.reach("caption")
        with store_lock:
            sessions[session.session_id] = session
        return _session_json(session)

    @app.get("/api/sessions/{sid}")
    async def read_session(sid: str):
        return _session_json(get_session(sid))

    @app.post("/api/sessions/{sid}/colorize")
    async def colorize(sid: str, body: dict):
        session = get_session(sid)
        if models is None:
            raise StageError("colorize", "no_models",
                             "service started without colorization models")
        edited = body.get("edited_text")
        with infer_lock:
            compiled = compile_session(session, edited, table=table)
            colorize_scene(session, models, seed=seed)
        return {
            "session_id": session.session_id,
            "result": f"/api/sessions/{session.session_id}/result.png",
            "instructions": compiled.to_json(),
        }

    @app.get("/api/sessions/{sid}/result.png")
    async def result_image(sid: str):
        return Response(content=result_png_bytes(get_session(sid)),
                        media_type="image/png")

    @app.get("/api/sessions/{sid}/overlay/{instance_id}.png")
    async def overlay_image(sid: str, instance_id: int):
        return Response(
            content=overlay_png_bytes(get_session(sid), instance_id),
            media_type="image/png")

    if frontend_dir:
        import os

        from fastapi.staticfiles import StaticFiles

        if os.path.isdir(frontend_dir):
            app.mount("/", StaticFiles(directory=frontend_dir, html=True),
                      name="frontend")
    return app
