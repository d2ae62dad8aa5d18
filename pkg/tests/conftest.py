import hashlib
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from loradex import DEFAULT_ENCODER_TAG, GenerationRecord, ingest_records
from loradex.providers import EmbeddingProvider
from loradex.store import PromptEntry, PromptRole, PromptSet

settings.register_profile("ci", derandomize=True, max_examples=60, deadline=None)
settings.load_profile("ci")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def hash_vector(text: str, dim: int) -> np.ndarray:
    """Deterministic pseudo-embedding: stable across runs and processes."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.standard_normal(dim).astype(np.float32)


class HashProvider(EmbeddingProvider):
    """Stub encoder: embeddings are hashes of the text, no model involved."""

    def __init__(self, dim: int = 16, encoder_tag: str = DEFAULT_ENCODER_TAG):
        self.dim = dim
        self.encoder_tag = encoder_tag
        self.capabilities = frozenset({"text"})
        self.calls = 0

    def embed_texts(self, texts):
        self.calls += 1
        return np.stack([hash_vector(t, self.dim) for t in texts])


class SuffixBlindProvider(HashProvider):
    """Encoder that cannot see appended text: every query becomes a no-op."""

    def embed_texts(self, texts):
        self.calls += 1
        base = [t.split(", ")[0] for t in texts]
        return np.stack([hash_vector(t, self.dim) for t in base])


def make_image_records(
    rng: np.random.Generator,
    adapter_ids: list[str],
    prompt_ids: list[str],
    seeds: list[int],
    dim: int,
    base_scale: float = 1.0,
    diff_scale: float = 1.0,
) -> list[GenerationRecord]:
    """Vanilla records plus per-adapter offsets; every key is base-covered."""
    records = []
    base = {}
    for pid in prompt_ids:
        for seed in seeds:
            vec = (rng.standard_normal(dim) * base_scale).astype(np.float32)
            base[(pid, seed)] = vec
            records.append(GenerationRecord("image", None, pid, seed, vec))
    for adapter_id in adapter_ids:
        for pid in prompt_ids:
            for seed in seeds:
                delta = (rng.standard_normal(dim) * diff_scale).astype(np.float32)
                records.append(
                    GenerationRecord("image", adapter_id, pid, seed, base[(pid, seed)] + delta)
                )
    return records


def make_corpus(rng, adapter_ids, prompt_ids, seeds, dim, **kwargs):
    records = make_image_records(rng, adapter_ids, prompt_ids, seeds, dim, **kwargs)
    return ingest_records(records, dim)


def make_prompt_set(texts: list[str], role=PromptRole.RETRIEVAL, prefix: str = "q") -> PromptSet:
    entries = [
        PromptEntry(f"{prefix}{i:03d}", "cat", "sub", text) for i, text in enumerate(texts)
    ]
    return PromptSet(role=role, prompts=entries)


def text_cache_records(texts, dim) -> list[GenerationRecord]:
    """Cache records matching what HashProvider would return for `texts`."""
    return [GenerationRecord("text", None, t, None, hash_vector(t, dim)) for t in texts]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260822)
