"""HTTP facade over a loaded index.

The app is built from live objects (index, provider, prompt set) so tests
can drive it in-process; the CLI `serve` command wires files and URLs into
`create_app` and hands the result to uvicorn.

Endpoints (all JSON):

* ``GET  /v1/health``        — liveness plus index identity.
* ``POST /v1/query``         — body ``{"text": ..., "top_k"?, "tau_s"?,
  "tau_c"?, "variant"?, "include_failed"?}``; 400 malformed or empty text,
  422 query vector with zero norm, 502 encoder trouble.
* ``GET  /v1/adapters``      — paginated signature summaries.
* ``GET  /v1/adapters/{id}`` — one full signature (404 unknown).
* ``GET  /v1/scatter``       — strength/consistency points with percentile
  ranks, ready to plot.
* ``GET  /v1/screening``     — quadrant report at caller-chosen splits.

Every query response echoes provenance: index_id, encoder_tag, thresholds,
and variant. Expensive query vectors are memoized per (text, variant,
prompt-set) in a small LRU cache; retrieval itself is cheap and always runs.
"""
from __future__ import annotations

import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .errors import (
    DataError,
    DegenerateInputError,
    LoradexError,
    ProviderError,
    UsageError,
)
from .providers import EmbeddingProvider
from .query import (
    DEFAULT_SEPARATOR,
    FilterConfig,
    QueryVariant,
    QueryVector,
    _json_float,
    build_query_vector,
    filter_and_truncate,
    rank,
)
from .store import CorpusIndex, PromptSet


@dataclass
class ServiceConfig:
    """File-level configuration consumed by the CLI `serve` command."""

    index_path: str
    provider_spec: str  # http(s) URL or path to a records cache
    prompts_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8710
    tau_s: float | None = None
    tau_c: float | None = None
    top_k: int | None = None
    variant: str = QueryVariant.SUFFIX.value
    cors_origins: list[str] = field(default_factory=list)
    query_cache_size: int = 1024


class _QueryVectorCache:
    """Tiny thread-safe LRU for built query vectors."""

    def __init__(self, capacity: int):
        self._capacity = max(0, capacity)
        self._entries: OrderedDict[tuple, QueryVector] = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key: tuple) -> QueryVector | None:
        with self._lock:
            qv = self._entries.get(key)
            if qv is not None:
                self._entries.move_to_end(key)
            return qv

    def put(self, key: tuple, qv: QueryVector) -> None:
        if self._capacity == 0:
            return
        with self._lock:
            self._entries[key] = qv
            self._entries.move_to_end(key)
            while len(self._entries) > self._capacity:
                self._entries.popitem(last=False)


def create_app(
    index: CorpusIndex,
    provider: EmbeddingProvider,
    retrieval_prompts: PromptSet | None = None,
    default_filter: FilterConfig | None = None,
    default_variant: QueryVariant = QueryVariant.SUFFIX,
    cors_origins: list[str] | None = None,
    query_cache_size: int = 1024,
    separator: str = DEFAULT_SEPARATOR,
):
    defaults = default_filter or FilterConfig()
    cache = _QueryVectorCache(query_cache_size)
    app = FastAPI(title="loradex", docs_url=None, redoc_url=None)

    if cors_origins:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(cors_origins),
            allow_methods=["GET", "POST"],
            allow_headers=["*"],
        )

    def _error(status: int, detail: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"detail": detail})

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        return _error(400, f"malformed request: {exc.errors()[:3]!r}")

    @app.exception_handler(ProviderError)
    async def _provider_handler(request: Request, exc: ProviderError):
        return _error(502, str(exc))

    @app.exception_handler(LoradexError)
    async def _engine_handler(request: Request, exc: LoradexError):
        if isinstance(exc, DegenerateInputError):
            return _error(422, str(exc))
        if isinstance(exc, (UsageError, DataError)):
            return _error(400, str(exc))
        return _error(500, str(exc))

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "index_id": index.index_id,
            "encoder_tag": index.encoder_tag,
            "dim": index.dim,
            "adapters": len(index),
            "created_at": index.created_at,
            "manifest": index.manifest,
        }

    @app.post("/v1/query")
    async def query(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body must be JSON")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            return _error(400, "field 'text' must be a non-empty string")

        variant_name = body.get("variant", default_variant.value)
        try:
            variant = QueryVariant(variant_name)
        except ValueError:
            return _error(400, f"unknown variant {variant_name!r}")

        def _num(name: str, fallback: float) -> float:
            value = body.get(name)
            if value is None:
                return fallback
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise UsageError(f"field {name!r} must be a number")
            return float(value)

        top_k = body.get("top_k", defaults.top_k)
        if isinstance(top_k, bool) or not isinstance(top_k, int) or top_k < 1:
            return _error(400, "field 'top_k' must be a positive integer")
        include_failed = body.get("include_failed", False)
        if not isinstance(include_failed, bool):
            return _error(400, "field 'include_failed' must be a boolean")
        try:
            config = FilterConfig(
                tau_s=_num("tau_s", defaults.tau_s),
                tau_c=_num("tau_c", defaults.tau_c),
                top_k=top_k,
            )
        except (UsageError, DataError) as exc:
            return _error(400, str(exc))

        started = time.perf_counter()
        cache_key = (text, variant.value,
                     retrieval_prompts.set_id if retrieval_prompts else "")
        qv = cache.get(cache_key)
        if qv is None:
            qv = build_query_vector(text, retrieval_prompts, provider, variant, separator)
            cache.put(cache_key, qv)
        ranked = rank(index, qv)
        result = filter_and_truncate(ranked, qv, index, config, include_failed)
        payload = result.to_dict()
        payload["timing_ms"] = round((time.perf_counter() - started) * 1000.0, 3)
        return payload

    @app.get("/v1/adapters")
    def adapters(offset: int = 0, limit: int = 100):
        if offset < 0 or limit < 1:
            raise UsageError("offset must be >= 0 and limit >= 1")
        ids = index.adapter_ids()
        page = ids[offset:offset + limit]
        return {
            "total": len(ids),
            "offset": offset,
            "limit": limit,
            "adapters": [
                {
                    "adapter_id": a,
                    "strength": index.signatures[a].strength,
                    "consistency": index.signatures[a].consistency,
                    "sample_count": index.signatures[a].sample_count,
                }
                for a in page
            ],
        }

    @app.get("/v1/adapters/{adapter_id}")
    def adapter_detail(adapter_id: str):
        sig = index.get(adapter_id)
        if sig is None:
            return _error(404, f"unknown adapter {adapter_id!r}")
        return {
            "adapter_id": sig.adapter_id,
            "strength": sig.strength,
            "consistency": sig.consistency,
            "sample_count": sig.sample_count,
            "dim": sig.dim,
            "encoder_tag": sig.encoder_tag,
            "direction": [float(x) for x in sig.direction],
        }

    @app.get("/v1/scatter")
    def scatter():
        from .analytics import screening_report

        report = screening_report(index)
        return {
            "index_id": index.index_id,
            "tau_s_default": _json_float(defaults.tau_s),
            "tau_c_default": _json_float(defaults.tau_c),
            "points": [e.to_dict() for e in report.entries],
        }

    @app.get("/v1/screening")
    def screening(strength_split: float = 0.5, consistency_split: float = 0.5):
        from .analytics import screening_report

        report = screening_report(index, strength_split, consistency_split)
        return report.to_dict()

    return app
