"""Checked-in fixture files must parse to exactly the recorded values."""
import hashlib
import json

import numpy as np
import pytest

from loradex import (
    FileBackedProvider,
    FilterConfig,
    build_index,
    ingest_records,
    load_corpus,
    load_index,
    read_records,
    retrieve,
    save_index,
    write_records,
    write_sidecar,
)
from loradex.query import QueryVariant
from loradex.store import PromptRole, load_prompt_set


@pytest.fixture
def expected(fixtures_dir):
    return json.loads((fixtures_dir / "expected.json").read_text())


def test_fixture_files_unmodified(fixtures_dir, expected):
    for name, digest in expected["file_sha256"].items():
        assert hashlib.sha256((fixtures_dir / name).read_bytes()).hexdigest() == digest, name


def test_records_manifest(fixtures_dir, expected):
    corpus = ingest_records(read_records(fixtures_dir / "records.jsonl"), expected["dim"])
    assert corpus.manifest.to_dict() == expected["manifest"]


def test_records_rewrite_is_byte_identical(fixtures_dir, expected, tmp_path):
    corpus = ingest_records(read_records(fixtures_dir / "records.jsonl"), expected["dim"])
    out = tmp_path / "records.jsonl"
    write_records(corpus.iter_records(), out)
    assert out.read_bytes() == (fixtures_dir / "records.jsonl").read_bytes()


def test_sidecar_rewrite_is_byte_identical(fixtures_dir, tmp_path):
    corpus = load_corpus(fixtures_dir / "corpus.crls")
    out = tmp_path / "corpus.crls"
    write_sidecar(corpus, out)
    assert out.read_bytes() == (fixtures_dir / "corpus.crls").read_bytes()


def test_sidecar_agrees_with_jsonl(fixtures_dir, expected):
    jsonl = ingest_records(read_records(fixtures_dir / "records.jsonl"), expected["dim"])
    binary = load_corpus(fixtures_dir / "corpus.crls")
    assert binary.manifest.to_dict() == jsonl.manifest.to_dict()
    for a, b in zip(jsonl.iter_records(), binary.iter_records()):
        assert a == b


def test_index_roundtrip_and_id(fixtures_dir, expected, tmp_path):
    index = load_index(fixtures_dir / "index.ldxi")
    assert index.index_id == expected["index_id"]
    assert index.created_at == expected["created_at"]
    assert index.adapter_ids() == expected["adapters"]
    out = tmp_path / "index.ldxi"
    save_index(index, out)
    assert out.read_bytes() == (fixtures_dir / "index.ldxi").read_bytes()


def test_rebuild_reproduces_index(fixtures_dir, expected):
    corpus = load_corpus(fixtures_dir / "corpus.crls")
    rebuilt = build_index(corpus, created_at=expected["created_at"])
    stored = load_index(fixtures_dir / "index.ldxi")
    assert rebuilt == stored

    want = expected["first_signature"]
    sig = rebuilt.signatures[want["adapter_id"]]
    assert sig.strength == want["strength"]
    assert sig.consistency == want["consistency"]
    assert sig.sample_count == want["sample_count"]
    digest = hashlib.sha256(
        np.ascontiguousarray(sig.direction, dtype="<f8").tobytes()
    ).hexdigest()
    assert digest == want["direction_sha256"]


def test_recorded_query_reproduces(fixtures_dir, expected):
    index = load_index(fixtures_dir / "index.ldxi")
    prompts = load_prompt_set(fixtures_dir / "prompts_retrieval.tsv", PromptRole.RETRIEVAL)
    provider = FileBackedProvider.from_path(fixtures_dir / "query_cache.jsonl")
    want = expected["query"]
    result = retrieve(
        index,
        want["text"],
        prompts,
        provider,
        FilterConfig(tau_s=float("inf"), tau_c=-1.0, top_k=3),
        QueryVariant(want["variant"]),
    )
    assert [e.adapter_id for e in result.entries] == want["order"]
    assert [e.score for e in result.entries] == want["scores"]


def test_prompt_sets_parse(fixtures_dir):
    retrieval = load_prompt_set(fixtures_dir / "prompts_retrieval.tsv", PromptRole.RETRIEVAL)
    indexing = load_prompt_set(
        fixtures_dir / "prompts_indexing.tsv",
        PromptRole.INDEXING,
        disjoint_from=retrieval,
    )
    assert [p.prompt_id for p in retrieval.prompts] == ["ret-000", "ret-001", "ret-002"]
    assert [p.prompt_id for p in indexing.prompts] == ["idx-000", "idx-001"]
