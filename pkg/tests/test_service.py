import numpy as np
import pytest
from fastapi.testclient import TestClient

from loradex import FilterConfig, ProviderError, build_index, ingest_records
from loradex.query import QueryVariant
from loradex.service import create_app

from conftest import HashProvider, SuffixBlindProvider, make_image_records, make_prompt_set

DIM = 8


@pytest.fixture(scope="module")
def index():
    rng = np.random.default_rng(99)
    records = make_image_records(rng, ["a1", "a2", "a3", "a4"], ["p1", "p2"], [0, 1], dim=DIM)
    return build_index(ingest_records(records, DIM), created_at="2026-01-01T00:00:00Z")


@pytest.fixture()
def provider():
    return HashProvider(dim=DIM)


@pytest.fixture()
def client(index, provider):
    app = create_app(
        index,
        provider,
        retrieval_prompts=make_prompt_set(["a dog", "a cat"]),
        default_filter=FilterConfig(tau_s=float("inf"), tau_c=-2.0, top_k=3),
    )
    return TestClient(app, raise_server_exceptions=False)


class TestHealth:
    def test_reports_identity(self, client, index):
        body = client.get("/v1/health").json()
        assert body["status"] == "ok"
        assert body["index_id"] == index.index_id
        assert body["adapters"] == 4
        assert body["dim"] == DIM


class TestQuery:
    def test_happy_path_and_provenance(self, client, index):
        resp = client.post("/v1/query", json={"text": "red"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["index_id"] == index.index_id
        assert body["variant"] == "suffix"
        assert body["tau_c"] == -2.0
        assert len(body["entries"]) == 3  # top_k default from service config
        assert "timing_ms" in body

    def test_deterministic_identical_bodies(self, client):
        a = client.post("/v1/query", json={"text": "red"}).json()
        b = client.post("/v1/query", json={"text": "red"}).json()
        a.pop("timing_ms"), b.pop("timing_ms")
        assert a == b

    def test_overrides_applied(self, client):
        resp = client.post(
            "/v1/query",
            json={"text": "red", "top_k": 1, "tau_s": 100.0, "tau_c": -5.0,
                  "variant": "query_only", "include_failed": True},
        )
        body = resp.json()
        assert body["top_k"] == 1 and body["tau_s"] == 100.0
        assert body["variant"] == "query_only"
        assert len([e for e in body["entries"] if e["passed_filter"]]) == 1

    def test_empty_text_is_400(self, client):
        assert client.post("/v1/query", json={"text": "  "}).status_code == 400
        assert client.post("/v1/query", json={}).status_code == 400

    def test_malformed_bodies_are_400(self, client):
        assert client.post("/v1/query", json={"text": "red", "top_k": 0}).status_code == 400
        assert client.post("/v1/query", json={"text": "red", "top_k": "five"}).status_code == 400
        assert client.post("/v1/query", json={"text": "red", "tau_s": "hot"}).status_code == 400
        assert client.post("/v1/query", json={"text": "red", "variant": "bogus"}).status_code == 400
        assert client.post("/v1/query", content=b"not json").status_code == 400

    def test_noop_query_is_422(self, index):
        app = create_app(index, SuffixBlindProvider(dim=DIM),
                         retrieval_prompts=make_prompt_set(["a dog"]))
        client = TestClient(app, raise_server_exceptions=False)
        resp = client.post("/v1/query", json={"text": "red"})
        assert resp.status_code == 422
        assert "no-op" in resp.json()["detail"]

    def test_provider_failure_is_502(self, index):
        class DownProvider(HashProvider):
            def embed_texts(self, texts):
                raise ProviderError("encoder fell over")

        app = create_app(index, DownProvider(dim=DIM),
                         retrieval_prompts=make_prompt_set(["a dog"]))
        client = TestClient(app, raise_server_exceptions=False)
        resp = client.post("/v1/query", json={"text": "red"})
        assert resp.status_code == 502

    def test_query_vector_cache_skips_provider(self, index, provider):
        app = create_app(index, provider, retrieval_prompts=make_prompt_set(["a dog"]))
        client = TestClient(app)
        client.post("/v1/query", json={"text": "red"})
        calls_after_first = provider.calls
        client.post("/v1/query", json={"text": "red", "top_k": 2})
        assert provider.calls == calls_after_first  # cached vector reused
        client.post("/v1/query", json={"text": "red", "variant": "prefix"})
        assert provider.calls > calls_after_first  # different variant: rebuilt


class TestCorpusEndpoints:
    def test_adapters_paginated(self, client):
        body = client.get("/v1/adapters", params={"offset": 1, "limit": 2}).json()
        assert body["total"] == 4
        assert [a["adapter_id"] for a in body["adapters"]] == ["a2", "a3"]

    def test_adapter_detail_and_404(self, client, index):
        body = client.get("/v1/adapters/a1").json()
        sig = index.signatures["a1"]
        assert body["strength"] == sig.strength
        assert len(body["direction"]) == DIM
        assert client.get("/v1/adapters/zzz").status_code == 404

    def test_scatter_has_all_points(self, client):
        body = client.get("/v1/scatter").json()
        assert len(body["points"]) == 4
        point = body["points"][0]
        assert {"adapter_id", "strength_rank", "consistency_rank", "quadrant"} <= set(point)

    def test_screening_splits(self, client):
        body = client.get("/v1/screening", params={"strength_split": 0.0,
                                                   "consistency_split": 0.0}).json()
        assert all(e["flagged"] for e in body["entries"])
        assert "disclaimer" in body


class TestCors:
    def test_allowed_origin_echoed(self, index, provider):
        app = create_app(index, provider, retrieval_prompts=make_prompt_set(["a dog"]),
                         cors_origins=["http://localhost:5173"])
        client = TestClient(app)
        resp = client.get("/v1/health", headers={"Origin": "http://localhost:5173"})
        assert resp.headers.get("access-control-allow-origin") == "http://localhost:5173"
