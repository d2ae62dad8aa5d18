"""HTTP front of the sidecar.

Three endpoints, all stateless:

    GET  /v1/info         identity: encoder_tag, dim, capabilities, limits
    POST /v1/embed_text   {"texts": [...]}  -> vectors + truncated flags
    POST /v1/embed_image  {"images": [...]} -> vectors (payloads are base64)

Status codes: 400 malformed request, 413 batch over the configured max,
422 payload that is syntactically fine but not a decodable image.

Configuration is environment-only:

    EMBED_SIDECAR_MODEL       backend model id (default dev-hash/512)
    EMBED_SIDECAR_DEVICE      passed to the backend (default cpu)
    EMBED_SIDECAR_MAX_BATCH   per-request item cap (default 64)
    EMBED_SIDECAR_HOST/PORT   bind address for `embed-sidecar` (127.0.0.1:8600)

Handlers share one backend instance. The bundled hash backend is pure, so no
locking is needed; a backend holding real model state must do its own
serialization — the contract here is only determinism and order preservation.
"""
from __future__ import annotations

import base64
import binascii
import os

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backend import DEFAULT_MODEL_ID, EncoderBackend, UndecodableImageError, load_backend


class TextBatch(BaseModel):
    texts: list[str]


class ImageBatch(BaseModel):
    images: list[str]


def create_app(backend: EncoderBackend | None = None,
               max_batch: int | None = None) -> FastAPI:
    if backend is None:
        backend = load_backend(
            os.environ.get("EMBED_SIDECAR_MODEL", DEFAULT_MODEL_ID),
            os.environ.get("EMBED_SIDECAR_DEVICE", "cpu"),
        )
    if max_batch is None:
        max_batch = int(os.environ.get("EMBED_SIDECAR_MAX_BATCH", "64"))
    if max_batch < 1:
        raise ValueError(f"max_batch must be >= 1, got {max_batch}")

    app = FastAPI(title="embed-sidecar")

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        where = ".".join(str(p) for p in first.get("loc", ()))
        detail = f"malformed request: {first.get('msg', 'invalid body')} at {where}"
        return JSONResponse(status_code=400, content={"detail": detail})

    @app.exception_handler(UndecodableImageError)
    async def undecodable(request: Request, exc: UndecodableImageError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    def check_batch(n: int) -> None:
        if n > max_batch:
            raise HTTPException(413, f"batch of {n} items exceeds the max of {max_batch}")

    def respond(vectors: np.ndarray, truncated: list[bool]) -> dict:
        return {
            "vectors": vectors.tolist(),
            "dim": backend.dim,
            "encoder_tag": backend.encoder_tag,
            "truncated": truncated,
        }

    @app.get("/v1/info")
    def info() -> dict:
        return {
            "encoder_tag": backend.encoder_tag,
            "dim": backend.dim,
            "capabilities": ["text", "image"],
            "token_limit": backend.token_limit,
            "max_batch": max_batch,
            "model_id": backend.model_id,
        }

    @app.post("/v1/embed_text")
    def embed_text(batch: TextBatch) -> dict:
        check_batch(len(batch.texts))
        vectors, truncated = backend.encode_text(batch.texts)
        return respond(vectors, truncated)

    @app.post("/v1/embed_image")
    def embed_image(batch: ImageBatch) -> dict:
        check_batch(len(batch.images))
        blobs = []
        for i, payload in enumerate(batch.images):
            try:
                blobs.append(base64.b64decode(payload, validate=True))
            except (binascii.Error, ValueError) as exc:
                raise UndecodableImageError(i, f"invalid base64 ({exc})") from exc
        vectors = backend.encode_image(blobs)
        return respond(vectors, [False] * len(blobs))

    return app


def main() -> None:
    """Console entry point: serve with settings taken from the environment."""
    import uvicorn

    host = os.environ.get("EMBED_SIDECAR_HOST", "127.0.0.1")
    port = int(os.environ.get("EMBED_SIDECAR_PORT", "8600"))
    uvicorn.run(create_app(), host=host, port=port, log_level="info")
